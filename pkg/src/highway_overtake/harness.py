"""Experiment commands: train, evaluate, roll out traces, compare algorithms.

Each ``cmd_*`` function returns a process exit status (0 success,
1 usage/config, 2 I/O, 3 data format) and reports errors on stderr, so
they can be called from tests as well as from the command line.
"""
from __future__ import annotations

import csv
import functools
import io
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import formats, neural
from .agents import DDQN, DQN, REFERENCE, TrainingResult, derive_seed, evaluate, run_training
from .config import RunConfig, format_config, load_config, parse_config
from .env import HighwayEnv
from .errors import ConfigError, WeightsFormatError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FORMAT = 0, 1, 2, 3

TRACE_STREAM = 4

COMPARE_COLUMNS = ["seed", "algorithm", "return", "return_normalized", "collision",
                   "mean_speed", "distance", "final_window_return"]


def _guarded(fn):
    """Map the package's failure modes onto exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except WeightsFormatError as exc:
            print(f"weights error: {exc}", file=sys.stderr)
            return EXIT_FORMAT
        except OSError as exc:
            where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
            print(f"I/O error{where}: {exc.strerror or exc}", file=sys.stderr)
            return EXIT_IO
    return wrapper


def resolve_config(config_path=None, seed: Optional[int] = None) -> RunConfig:
    """Config file (or defaults when ``config_path`` is None) with the CLI seed applied."""
    if config_path is None:
        cfg = parse_config("")
    else:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = load_config(path)
    if seed is not None:
        cfg = cfg.with_overrides(train={"seed": int(seed)})
    return cfg.validate()


def train_run(cfg: RunConfig, out_dir) -> TrainingResult:
    """Run training and write the run directory layout."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(format_config(cfg))
    agent_cfg = cfg.agent
    learned = agent_cfg.algorithm in (DQN, DDQN)

    def checkpoint(episode, params):
        ckpt = out / "checkpoints"
        ckpt.mkdir(exist_ok=True)
        formats.save_weights(ckpt / f"ep-{episode:04d}.w", params, agent_cfg.algorithm)

    result = run_training(agent_cfg, cfg.env, cfg.seed, checkpoint if learned else None,
                          progress=lambda m: log.info("episode %d return %.3f steps %d collision %d",
                                                      m.episode, m.ret, m.steps, m.collision))
    formats.write_metrics(out / "metrics.csv", result.metrics)
    if learned:
        formats.save_weights(out / "final.w", result.params, agent_cfg.algorithm)
    return result


@_guarded
def cmd_train(config_path=None, seed: Optional[int] = None, out="run") -> int:
    cfg = resolve_config(config_path, seed)
    result = train_run(cfg, out)
    print(f"trained {cfg.agent.algorithm} for {len(result.metrics)} episodes -> {out}")
    return EXIT_OK


def load_policy(spec, cfg: RunConfig):
    """``"reference"`` or a weights file whose tag and shape fit the config."""
    if str(spec) == REFERENCE:
        return REFERENCE
    algorithm, params = formats.load_weights(spec)
    expected = cfg.agent.algorithm
    if expected != REFERENCE and algorithm != expected:
        raise WeightsFormatError(f"{spec}: weights are for {algorithm!r}, config says {expected!r}")
    env = cfg.env
    in_dim = params.input_dim if isinstance(params, neural.DuelingParams) else params.layer_dims[0]
    out_dim = params.output_dim if isinstance(params, neural.DuelingParams) else params.layer_dims[-1]
    if in_dim != env.obs_size or out_dim != 5:
        raise WeightsFormatError(f"{spec}: network maps {in_dim} -> {out_dim}, environment needs "
                                 f"{env.obs_size} -> 5")
    return params


@_guarded
def cmd_eval(weights=None, config_path=None, episodes: Optional[int] = None,
             seed: Optional[int] = None, out=None) -> int:
    cfg = resolve_config(config_path, seed)
    if weights is None:
        if cfg.agent.algorithm != REFERENCE:
            raise ConfigError("a weights file is required unless algorithm = reference")
        weights = REFERENCE
    policy = load_policy(weights, cfg)
    n = cfg.get("io", "eval_episodes") if episodes is None else int(episodes)
    metrics = evaluate(policy, cfg.env, n, cfg.seed)
    summary = {"policy": str(weights), "seed": cfg.seed, **metrics.summary()}
    print(json.dumps(summary))
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "eval.json").write_text(json.dumps(summary, indent=2) + "\n")
        formats.write_metrics(Path(out) / "eval_metrics.csv", metrics.episodes)
    return EXIT_OK


def rollout(policy, cfg: RunConfig, trace_path) -> list:
    """One traced episode. Returns the per-policy-step action indices (1..5)."""
    env = HighwayEnv(cfg.env)
    trace_path = Path(trace_path)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    lines: list = []
    pending: list = []
    current = {"action": None}

    def hook(world, events):
        rows = []
        for v in world.vehicles:
            rows.append({"tick": world.tick, "time": world.time, "id": v.id, "role": v.role,
                         "x": v.x, "y": v.y, "v1": v.v1, "lane": v.lane, "heading": v.heading,
                         "action": current["action"], "reward": None, "done": False})
        pending.append(rows)

    actions, rewards = [], []
    obs = env.reset(derive_seed(cfg.seed, TRACE_STREAM))
    done = False
    while not done:
        if isinstance(policy, str):
            # the reference labels its decision only after choosing it
            current["action"] = None
            result = env.step_reference(tick_hook=hook)
            for rows in pending:
                for row in rows:
                    row["action"] = result.info["action"]
        else:
            a = neural.argmax_action(neural.forward(policy, obs)[0]) + 1
            current["action"] = a
            result = env.step(a, tick_hook=hook)
        obs, r, done = result.observation, result.reward, result.done
        for row in pending[-1]:
            row["reward"] = r
            row["done"] = done
        for rows in pending:
            lines.extend(formats.trace_line(row) for row in rows)
        pending.clear()
        actions.append(result.info["action"])
        rewards.append(r)

    trace_path.write_text("".join(lines))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "action", "reward"])
    for i, (a, r) in enumerate(zip(actions, rewards)):
        writer.writerow([i + 1, a, repr(float(r))])
    actions_path(trace_path).write_text(buf.getvalue())
    return actions


def actions_path(trace_path) -> Path:
    trace_path = Path(trace_path)
    return trace_path.with_name(trace_path.stem + ".actions.csv")


@_guarded
def cmd_rollout(policy_spec=REFERENCE, config_path=None, seed: Optional[int] = None,
                trace="trace/rollout.jsonl") -> int:
    cfg = resolve_config(config_path, seed)
    policy = load_policy(policy_spec, cfg)
    actions = rollout(policy, cfg, trace)
    print(f"{len(actions)} policy steps -> {trace}")
    return EXIT_OK


def final_window_mean(result: TrainingResult, fraction: float) -> float:
    rows = result.metrics
    if not rows:
        return float("nan")
    k = max(1, int(round(len(rows) * fraction)))
    return float(np.mean([m.ret for m in rows[-k:]]))


def compare(cfg: RunConfig, seeds: Sequence[int], out_dir=None) -> list:
    """Train DQN and DDQN per seed, evaluate both plus the reference, tabulate."""
    rows = []
    n_eval = cfg.get("io", "eval_episodes")
    window = cfg.get("io", "final_window")
    for seed in seeds:
        seed_cfg = cfg.with_overrides(train={"seed": int(seed)})
        evals, final = {}, {}
        for algorithm in (REFERENCE, DQN, DDQN):
            run_cfg = seed_cfg.with_overrides(agent={"algorithm": algorithm})
            if algorithm == REFERENCE:
                policy = REFERENCE
                final[algorithm] = float("nan")
            else:
                run_dir = None if out_dir is None else Path(out_dir) / f"seed-{seed}" / algorithm
                if run_dir is None:
                    result = run_training(run_cfg.agent, run_cfg.env, int(seed))
                else:
                    result = train_run(run_cfg, run_dir)
                policy = result.params
                final[algorithm] = final_window_mean(result, window)
            evals[algorithm] = evaluate(policy, run_cfg.env, n_eval, int(seed))
        # normalise over every evaluation episode of this seed so algorithms share a scale
        rets = [e.ret for m in evals.values() for e in m.episodes]
        lo, hi = (min(rets), max(rets)) if rets else (0.0, 0.0)
        for algorithm, m in evals.items():
            s = m.summary()
            norm = float(np.mean([(e.ret - lo) / (hi - lo) if hi > lo else 1.0
                                  for e in m.episodes])) if m.episodes else float("nan")
            rows.append({"seed": int(seed), "algorithm": algorithm, "return": s["return"],
                         "return_normalized": norm, "collision": s["collision"],
                         "mean_speed": s["mean_speed"], "distance": s["distance"],
                         "final_window_return": final[algorithm]})
    return rows


@_guarded
def cmd_compare(config_path=None, seeds: Sequence[int] = (0, 1, 2), out="compare") -> int:
    cfg = resolve_config(config_path)
    rows = compare(cfg, seeds, out)
    Path(out).mkdir(parents=True, exist_ok=True)
    text = formats.metrics_csv(rows, COMPARE_COLUMNS)
    (Path(out) / "compare.csv").write_text(text)
    print(text, end="")
    return EXIT_OK
