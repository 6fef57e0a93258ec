"""INI-style run configuration with documented defaults.

Every key lives in one of the sections ``[env] [idm] [mobil] [gains]
[agent] [train] [io]``. Unknown sections or keys are rejected so typos fail
loudly instead of silently falling back to a default.
"""
from __future__ import annotations

import configparser
import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .agents import AgentConfig
from .drivers import ControlGains, DriverParams, IdmParams, MobilParams
from .env import EnvConfig, RewardParams
from .errors import ConfigError
from .sim import RoadConfig, ScenarioConfig

_env, _scn, _road, _rew = EnvConfig(), ScenarioConfig(), RoadConfig(), RewardParams()
_idm, _mob, _gain, _agent = IdmParams(), MobilParams(), ControlGains(), AgentConfig()

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, Any]]] = {
    "env": {
        "policy_hz": (int, _env.policy_hz),
        "sim_hz": (int, _env.sim_hz),
        "horizon_s": (float, _env.horizon_s),
        "speed_step": (float, _env.speed_step),
        "neighbors_k": (int, _env.neighbors_k),
        "obs_signed": (bool, _env.obs_signed),
        "destination_m": (Optional[float], _env.destination_m),
        "lane_count": (int, _road.lane_count),
        "lane_width": (float, _road.lane_width),
        "vehicles_per_lane": (int, _scn.vehicles_per_lane),
        "ego_speed_min": (float, _scn.ego_speed_range[0]),
        "ego_speed_max": (float, _scn.ego_speed_range[1]),
        "surrounding_speed_min": (float, _scn.surrounding_speed_range[0]),
        "surrounding_speed_max": (float, _scn.surrounding_speed_range[1]),
        "spacing_min": (float, _scn.spacing_range[0]),
        "spacing_max": (float, _scn.spacing_range[1]),
        "w_collision": (float, _rew.w_collision),
        "w_speed": (float, _rew.w_speed),
        "w_lane": (float, _rew.w_lane),
        "v_max": (float, _rew.v_max),
        "preferred_lane": (int, _rew.preferred_lane),
    },
    "idm": {
        "a_max": (float, _idm.a_max),
        "delta": (float, _idm.delta),
        "T": (float, _idm.T),
        "b": (float, _idm.b),
        "d0": (float, _idm.d0),
        "v_tar": (float, _idm.v_tar),
        "formula_mode": (str, _idm.formula_mode),
    },
    "mobil": {
        "z": (float, _mob.z),
        "b_safe": (float, _mob.b_safe),
        "a_th": (float, _mob.a_th),
    },
    "gains": {
        "k_p": (float, _gain.k_p),
        "k_p_lat": (float, _gain.k_p_lat),
        "k_p_heading": (float, _gain.k_p_heading),
    },
    "agent": {
        "algorithm": (str, _agent.algorithm),
        "gamma": (float, _agent.gamma),
        "tabular_alpha": (float, _agent.tabular_alpha),
        "nn_lr": (float, _agent.nn_lr),
        "hidden": (int, _agent.hidden),
        "dueling_agg": (str, _agent.dueling_agg),
        "grad_clip": (Optional[float], _agent.grad_clip),
    },
    "train": {
        "episodes": (int, _agent.episodes),
        "batch": (int, _agent.batch),
        "target_sync_steps": (int, _agent.target_sync_steps),
        "buffer_capacity": (int, _agent.buffer_capacity),
        "eps_start": (float, _agent.eps_start),
        "eps_end": (float, _agent.eps_end),
        "eps_decay_steps": (int, _agent.eps_decay_steps),
        "train_every": (int, _agent.train_every),
        "checkpoint_every": (int, _agent.checkpoint_every),
        "seed": (int, 0),
    },
    "io": {
        "eval_episodes": (int, 10),
        "final_window": (float, 0.1),
    },
}


def _parse_value(kind, text: str, where: str):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if kind is Optional[float]:
            return None if text.lower() in ("none", "") else float(text)
        return kind(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r}") from None


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: {k: d for k, (_, d) in keys.items()}
                                                  for s, keys in SCHEMA.items()})

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.values == other.values

    def get(self, section: str, key: str):
        return self.values[section][key]

    def with_overrides(self, **sections) -> "RunConfig":
        """Copy with ``section={key: value}`` overrides applied (keys checked)."""
        new = RunConfig(copy.deepcopy(self.values))
        for section, updates in sections.items():
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]")
            for key, value in updates.items():
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                new.values[section][key] = value
        return new

    @property
    def seed(self) -> int:
        return self.values["train"]["seed"]

    @property
    def drivers(self) -> DriverParams:
        v = self.values
        return DriverParams(IdmParams(**v["idm"]), MobilParams(**v["mobil"]), ControlGains(**v["gains"]))

    @property
    def env(self) -> EnvConfig:
        e = self.values["env"]
        cfg = EnvConfig(
            policy_hz=e["policy_hz"], sim_hz=e["sim_hz"], horizon_s=e["horizon_s"],
            speed_step=e["speed_step"], neighbors_k=e["neighbors_k"], obs_signed=e["obs_signed"],
            destination_m=e["destination_m"],
            scenario=ScenarioConfig(
                vehicles_per_lane=e["vehicles_per_lane"],
                ego_speed_range=(e["ego_speed_min"], e["ego_speed_max"]),
                surrounding_speed_range=(e["surrounding_speed_min"], e["surrounding_speed_max"]),
                spacing_range=(e["spacing_min"], e["spacing_max"]),
                seed=self.seed),
            road=RoadConfig(e["lane_count"], e["lane_width"]),
            reward=RewardParams(e["w_collision"], e["w_speed"], e["w_lane"], e["v_max"],
                                e["preferred_lane"]),
            drivers=self.drivers)
        cfg.validate()
        return cfg

    @property
    def agent(self) -> AgentConfig:
        a, t = self.values["agent"], self.values["train"]
        cfg = AgentConfig(**a, **{k: v for k, v in t.items() if k != "seed"})
        cfg.validate()
        return cfg

    def validate(self) -> "RunConfig":
        self.env, self.agent  # noqa: B018 - building them runs every check
        io = self.values["io"]
        if io["eval_episodes"] < 0 or not 0 < io["final_window"] <= 1:
            raise ConfigError("eval_episodes must be >= 0 and final_window in (0, 1]")
        return self


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case ("T")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    cfg = RunConfig()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            kind, _ = SCHEMA[section][key]
            cfg.values[section][key] = _parse_value(kind, raw, f"{source} [{section}] {key}")
    return cfg.validate()


def load_config(path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), str(path))


def format_config(cfg: RunConfig) -> str:
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {_format_value(cfg.values[section][key])}")
        lines.append("")
    return "\n".join(lines)
