"""On-disk formats: binary weights, metrics CSV and JSONL traces."""
from __future__ import annotations

import csv
import io
import json
import math
import struct
import zlib
from pathlib import Path

import numpy as np

from . import neural
from .errors import ShapeError, WeightsFormatError

MAGIC = b"HWQW"
VERSION = 1
GROUP_PLAIN, GROUP_TRUNK, GROUP_VALUE, GROUP_ADVANTAGE = 0, 1, 2, 3

METRICS_COLUMNS = ["episode", "return", "return_normalized", "steps", "collision",
                   "mean_speed", "distance", "epsilon", "mean_td_error"]


# -- weights -----------------------------------------------------------------

def _tag(text: str) -> bytes:
    raw = text.encode("ascii")
    return struct.pack("<B", len(raw)) + raw


def _groups(params: neural.Params):
    if isinstance(params, neural.MlpParams):
        return [(GROUP_PLAIN, params)]
    return [(GROUP_TRUNK, params.trunk), (GROUP_VALUE, params.value),
            (GROUP_ADVANTAGE, params.advantage)]


def weights_to_bytes(params: neural.Params, algorithm: str) -> bytes:
    """Header, layer table, little-endian float64 payload, CRC32 trailer."""
    agg = params.aggregation if isinstance(params, neural.DuelingParams) else "none"
    layers = [(g, m.out_relu, w, b) for g, m in _groups(params)
              for w, b in zip(m.weights, m.biases)]
    out = bytearray(MAGIC + struct.pack("<H", VERSION) + _tag(algorithm) + _tag(agg))
    out += struct.pack("<I", len(layers))
    for g, out_relu, w, _ in layers:
        out += struct.pack("<BBII", g, int(out_relu), *w.shape)
    for _, _, w, b in layers:
        out += np.ascontiguousarray(w, dtype="<f8").tobytes()
        out += np.ascontiguousarray(b, dtype="<f8").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)))
    return bytes(out)


def weights_from_bytes(data: bytes) -> tuple[str, neural.Params]:
    if len(data) < 4 or data[:4] != MAGIC:
        raise WeightsFormatError("not a weights file (bad magic)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise WeightsFormatError("checksum mismatch: weights file is corrupted")
    try:
        pos = 4
        (version,) = struct.unpack_from("<H", body, pos)
        pos += 2
        if version != VERSION:
            raise WeightsFormatError(f"unsupported weights version {version}")
        tags = []
        for _ in range(2):
            (n,) = struct.unpack_from("<B", body, pos)
            tags.append(body[pos + 1:pos + 1 + n].decode("ascii"))
            pos += 1 + n
        algorithm, agg = tags
        (count,) = struct.unpack_from("<I", body, pos)
        pos += 4
        table = []
        for _ in range(count):
            table.append(struct.unpack_from("<BBII", body, pos))
            pos += 10
        groups: dict = {}
        for g, out_relu, rows, cols in table:
            w = np.frombuffer(body, dtype="<f8", count=rows * cols, offset=pos).reshape(rows, cols)
            pos += 8 * rows * cols
            b = np.frombuffer(body, dtype="<f8", count=cols, offset=pos)
            pos += 8 * cols
            entry = groups.setdefault(g, ([], [], bool(out_relu)))
            entry[0].append(w.astype(np.float64))
            entry[1].append(b.astype(np.float64))
        if pos != len(body):
            raise WeightsFormatError("trailing bytes after weight payload")
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise WeightsFormatError(f"truncated or malformed weights file: {exc}") from None

    def mlp(g):
        ws, bs, out_relu = groups[g]
        return neural.MlpParams(ws, bs, out_relu)

    try:
        if set(groups) == {GROUP_PLAIN}:
            return algorithm, mlp(GROUP_PLAIN)
        if set(groups) == {GROUP_TRUNK, GROUP_VALUE, GROUP_ADVANTAGE}:
            return algorithm, neural.DuelingParams(mlp(GROUP_TRUNK), mlp(GROUP_VALUE),
                                                   mlp(GROUP_ADVANTAGE), agg)
    except ShapeError as exc:
        raise WeightsFormatError(f"inconsistent layer table: {exc}") from None
    raise WeightsFormatError(f"unexpected layer groups {sorted(groups)}")


def save_weights(path, params: neural.Params, algorithm: str) -> None:
    Path(path).write_bytes(weights_to_bytes(params, algorithm))


def load_weights(path) -> tuple[str, neural.Params]:
    return weights_from_bytes(Path(path).read_bytes())


# -- metrics -----------------------------------------------------------------

def _num(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def metrics_row(m) -> dict:
    return {"episode": m.episode, "return": m.ret, "return_normalized": m.return_normalized,
            "steps": m.steps, "collision": m.collision, "mean_speed": m.mean_speed,
            "distance": m.distance, "epsilon": m.epsilon, "mean_td_error": m.mean_td_error}


def metrics_csv(rows, columns=METRICS_COLUMNS) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_num(row[c]) for c in columns])
    return buf.getvalue()


def write_metrics(path, episodes) -> None:
    Path(path).write_text(metrics_csv([metrics_row(m) for m in episodes]))


def read_metrics(path) -> list:
    """Rows as dicts of floats / ints, in file order."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for k, v in raw.items():
                row[k] = int(v) if k in ("episode", "steps", "collision") else float(v)
            rows.append(row)
    return rows


# -- traces ------------------------------------------------------------------

def trace_line(record: dict) -> str:
    return json.dumps(record, sort_keys=False, allow_nan=False) + "\n"


def read_trace(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
