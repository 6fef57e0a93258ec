"""Discrete meta-action MDP on top of the traffic simulation."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .drivers import DriverParams, KEEP, LEFT, RIGHT, lateral_control, longitudinal_control, \
    mobil_decision, reference_policy
from .errors import ConfigError, StateError
from .sim import MAX_SPEED, RoadConfig, ScenarioConfig, StepEvents, WorldState, spawn_scenario
from .traffic import COLLISION, DESTINATION, HORIZON, advance_world, decision_period


class MetaAction(enum.IntEnum):
    LANE_LEFT = 1
    IDLE = 2
    LANE_RIGHT = 3
    FASTER = 4
    SLOWER = 5

    @classmethod
    def from_index(cls, index: int) -> "MetaAction":
        """Map a 0-based network output index to an action."""
        if not 0 <= index < len(cls):
            raise ValueError(f"action index {index} outside [0, {len(cls) - 1}]")
        return cls(index + 1)

    @property
    def index(self) -> int:
        return int(self) - 1


def action_count() -> int:
    return len(MetaAction)


@dataclass(frozen=True)
class RewardParams:
    w_collision: float = 1.0
    w_speed: float = 0.1
    w_lane: float = 0.4
    v_max: float = MAX_SPEED
    preferred_lane: int = 1

    def __post_init__(self):
        if min(self.w_collision, self.w_speed, self.w_lane) < 0:
            raise ConfigError("reward weights must be non-negative")


@dataclass(frozen=True)
class EnvConfig:
    policy_hz: int = 1
    sim_hz: int = 20
    horizon_s: float = 100.0
    speed_step: float = 5.0
    neighbors_k: int = 5
    obs_signed: bool = True
    destination_m: Optional[float] = None
    scenario: ScenarioConfig = ScenarioConfig()
    road: RoadConfig = RoadConfig()
    reward: RewardParams = RewardParams()
    drivers: DriverParams = DriverParams()

    def validate(self):
        if self.policy_hz <= 0 or self.sim_hz <= 0 or self.sim_hz % self.policy_hz:
            raise ConfigError(f"sim_hz ({self.sim_hz}) must be a multiple of policy_hz ({self.policy_hz})")
        steps = self.horizon_s * self.policy_hz
        if self.horizon_s <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ConfigError(f"horizon_s * policy_hz must be a positive integer, got {steps}")
        if self.speed_step <= 0 or self.neighbors_k < 0:
            raise ConfigError("speed_step must be positive and neighbors_k non-negative")
        if self.destination_m is not None and self.destination_m <= 0:
            raise ConfigError("destination_m must be positive")
        self.scenario.validate()

    @property
    def max_policy_steps(self) -> int:
        return int(round(self.horizon_s * self.policy_hz))

    @property
    def obs_size(self) -> int:
        return 3 + 4 * self.neighbors_k


def observe(world: WorldState, neighbors_k: int = 5, signed: bool = True) -> np.ndarray:
    """Ego block followed by the ``neighbors_k`` nearest vehicles by |dx|."""
    road = world.road
    ego = world.ego
    obs = np.zeros(3 + 4 * neighbors_k)
    obs[0] = ego.v1 / MAX_SPEED
    obs[1] = (ego.lane - 1) / (road.lane_count - 1)
    obs[2] = (ego.y - road.lane_center(ego.lane)) / road.lane_width
    others = sorted(world.vehicles[1:], key=lambda v: (abs(v.x - ego.x), v.id))
    for k, v in enumerate(others[:neighbors_k]):
        dd = v.x - ego.x
        dv = v.v1 - ego.v1
        if not signed:
            dd, dv = abs(dd), abs(dv)
        obs[3 + 4 * k: 7 + 4 * k] = (1.0, dd / 100.0, dv / MAX_SPEED,
                                     (v.lane - ego.lane) / (road.lane_count - 1))
    return obs


def reward(world_after: WorldState, events: StepEvents, p: RewardParams = RewardParams()) -> float:
    ego = world_after.ego
    collision = 1.0 if events.ego_collision else 0.0
    return (-p.w_collision * collision
            - p.w_speed * (ego.v1 - p.v_max) ** 2
            - p.w_lane * (ego.lane - p.preferred_lane) ** 2)


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    total, weight = 0.0, 1.0
    for r in rewards:
        total += weight * r
        weight *= gamma
    return total


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.observation, self.reward, self.done, self.info))


class HighwayEnv:
    """One ego vehicle deciding at ``policy_hz`` among five meta-actions.

    Each decision is realised by the proportional controllers over
    ``sim_hz // policy_hz`` simulation ticks; the reward is evaluated once on
    the state after the last tick (or the colliding tick).
    """

    def __init__(self, cfg: EnvConfig = EnvConfig()):
        cfg.validate()
        self.cfg = cfg
        self.world: Optional[WorldState] = None
        self.done = True
        self.steps = 0
        self.distance = 0.0
        self.start_x = 0.0

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        cfg = self.cfg
        scenario = cfg.scenario if seed is None else replace(cfg.scenario, seed=int(seed))
        self.world = spawn_scenario(cfg.road, scenario, cfg.sim_hz, cfg.policy_hz)
        self.done = False
        self.steps = 0
        self.distance = 0.0
        self.start_x = self.world.ego.x
        return self.observe()

    def observe(self) -> np.ndarray:
        return observe(self.world, self.cfg.neighbors_k, self.cfg.obs_signed)

    def _apply_action(self, action: MetaAction):
        ego = self.world.ego
        lanes = self.cfg.road.lane_count
        if action == MetaAction.FASTER:
            ego = replace(ego, target_speed=min(ego.target_speed + self.cfg.speed_step, MAX_SPEED))
        elif action == MetaAction.SLOWER:
            ego = replace(ego, target_speed=max(ego.target_speed - self.cfg.speed_step, 0.0))
        elif action == MetaAction.LANE_LEFT:
            ego = replace(ego, target_lane=max(ego.target_lane - 1, 1))
        elif action == MetaAction.LANE_RIGHT:
            ego = replace(ego, target_lane=min(ego.target_lane + 1, lanes))
        self.world.vehicles[0] = ego

    def _run_ticks(self, controller, tick_hook=None) -> StepEvents:
        world = self.world
        params = self.cfg.drivers
        merged = StepEvents()
        for _ in range(decision_period(world)):
            x_before = world.ego.x
            _, events = advance_world(world, controller(), params=params)
            self.distance += world.ego.x - x_before
            merged.pairs.extend(events.pairs)
            merged.ego_collision = merged.ego_collision or events.ego_collision
            if tick_hook is not None:
                tick_hook(world, merged)
            if events.ego_collision:
                break
        return merged

    def _ego_lower_level(self):
        ego = self.world.ego
        gains = self.cfg.drivers.gains
        a1 = longitudinal_control(ego.target_speed, ego.v1, gains)
        yaw = lateral_control(ego.y, self.world.road.lane_center(ego.target_lane), ego.heading,
                              ego.v1, gains)
        return a1, yaw

    def _finish(self, events: StepEvents, action: MetaAction) -> StepResult:
        world = self.world
        self.steps += 1
        r = reward(world, events, self.cfg.reward)
        cause = None
        if events.ego_collision:
            cause = COLLISION
        elif self.steps >= self.cfg.max_policy_steps:
            cause = HORIZON
        elif self.cfg.destination_m is not None and world.ego.x >= self.cfg.destination_m:
            cause = DESTINATION
        if cause is not None:
            world.terminated = cause
            self.done = True
        info = {
            "cause": cause,
            "action": int(action),
            "speed": world.ego.v1,
            "distance": self.distance,
            "collision": events.ego_collision,
            "steps": self.steps,
        }
        return StepResult(self.observe(), r, self.done, info)

    def step(self, action, tick_hook=None) -> StepResult:
        """Apply a meta-action (``MetaAction`` or its 1..5 value).

        ``tick_hook(world, events)`` is called after every simulation tick.
        """
        if self.done:
            raise StateError("episode finished; call reset()")
        action = MetaAction(action)
        self._apply_action(action)
        events = self._run_ticks(self._ego_lower_level, tick_hook)
        return self._finish(events, action)

    def step_reference(self, tick_hook=None) -> StepResult:
        """One policy step with the ego itself driven by IDM + MOBIL.

        The decision is labelled with the meta-action that best describes
        it: a lane change, else faster/slower when the IDM acceleration at
        the decision instant exceeds the comfort threshold, else idle.
        """
        if self.done:
            raise StateError("episode finished; call reset()")
        world = self.world
        params = self.cfg.drivers
        decision = mobil_decision(world, 0, params.idm, params.mobil)
        ego = world.ego
        world.vehicles[0] = replace(ego, target_lane=decision.target_lane)
        first = reference_policy(world, 0, params, decide_lane=False)
        if decision.choice == LEFT:
            action = MetaAction.LANE_LEFT
        elif decision.choice == RIGHT:
            action = MetaAction.LANE_RIGHT
        elif first.a1 > params.mobil.a_th:
            action = MetaAction.FASTER
        elif first.a1 < -params.mobil.a_th:
            action = MetaAction.SLOWER
        else:
            action = MetaAction.IDLE

        def controller():
            ctl = reference_policy(self.world, 0, params, decide_lane=False)
            return ctl.a1, ctl.yaw_rate

        events = self._run_ticks(controller, tick_hook)
        return self._finish(events, action)
