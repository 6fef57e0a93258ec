"""World model: vehicle kinematics, collision geometry and scenario generation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigError, InvalidInputError

MAX_SPEED = 40.0
MAX_HEADING = math.pi / 4
VEHICLE_LENGTH = 5.0
VEHICLE_WIDTH = 2.0

EGO = "ego"
SURROUNDING = "surrounding"


@dataclass(frozen=True)
class RoadConfig:
    lane_count: int = 3
    lane_width: float = 4.0

    def __post_init__(self):
        if self.lane_count < 2:
            raise ConfigError(f"lane_count must be >= 2, got {self.lane_count}")
        if not self.lane_width > VEHICLE_WIDTH:
            raise ConfigError(f"lane_width must exceed vehicle width {VEHICLE_WIDTH}")

    def lane_center(self, lane: int) -> float:
        """Lateral coordinate of a lane's centerline (lane 1 sits at y = 0)."""
        return (lane - 1) * self.lane_width

    def lane_of(self, y: float) -> int:
        lane = int(math.floor(y / self.lane_width + 0.5)) + 1
        return min(max(lane, 1), self.lane_count)

    @property
    def y_bounds(self) -> tuple[float, float]:
        half = self.lane_width / 2
        return -half, self.lane_center(self.lane_count) + half


@dataclass(frozen=True, slots=True)
class VehicleState:
    id: int
    role: str
    x: float
    y: float
    v1: float
    v2: float = 0.0
    heading: float = 0.0
    lane: int = 1
    length: float = VEHICLE_LENGTH
    width: float = VEHICLE_WIDTH
    target_lane: int = 1
    target_speed: float = 25.0

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "role": self.role,
            "x": self.x,
            "y": self.y,
            "v1": self.v1,
            "v2": self.v2,
            "heading": self.heading,
            "lane": self.lane,
            "length": self.length,
            "width": self.width,
            "target_lane": self.target_lane,
            "target_speed": self.target_speed,
        }


def _integrate_clamped(v: float, a: float, dt: float, lo: float, hi: float):
    """Exact constant-acceleration step with the speed saturating at [lo, hi].

    Returns (new speed, displacement). Once the bound is hit the vehicle
    continues at the bound for the rest of the interval.
    """
    v_new = v + a * dt
    if lo <= v_new <= hi:
        return v_new, v * dt + 0.5 * a * dt * dt
    bound = lo if v_new < lo else hi
    t_hit = (bound - v) / a if a != 0.0 else 0.0
    t_hit = min(max(t_hit, 0.0), dt)
    disp = v * t_hit + 0.5 * a * t_hit * t_hit + bound * (dt - t_hit)
    return bound, disp


def step_kinematics(state: VehicleState, a1: float, a2: float, dt: float,
                    road: Optional[RoadConfig] = None) -> VehicleState:
    """Advance one vehicle by ``dt`` under constant commands.

    ``a1`` is the longitudinal acceleration (m/s^2). ``a2`` is the yaw-rate
    command (rad/s) of the lateral channel; the heading it produces sets the
    lateral speed ``v2 = v1 * sin(heading)`` and the lateral displacement is
    integrated with the matching constant lateral acceleration.
    """
    if not (math.isfinite(a1) and math.isfinite(a2) and math.isfinite(dt)):
        raise InvalidInputError(f"non-finite input a1={a1}, a2={a2}, dt={dt}")
    if dt <= 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    road = road or RoadConfig()

    v1, dx = _integrate_clamped(state.v1, a1, dt, 0.0, MAX_SPEED)
    heading = min(max(state.heading + a2 * dt, -MAX_HEADING), MAX_HEADING)
    v2 = v1 * math.sin(heading)
    a_lat = (v2 - state.v2) / dt
    y = state.y + state.v2 * dt + 0.5 * a_lat * dt * dt

    lo, hi = road.y_bounds
    if y < lo or y > hi:
        # the road edge acts as a wall: lateral motion stops there
        y = min(max(y, lo), hi)
        v2 = 0.0
        heading = 0.0
    return replace(state, x=state.x + dx, y=y, v1=v1, v2=v2, heading=heading,
                   lane=road.lane_of(y))


def _corners(v: VehicleState) -> np.ndarray:
    c, s = math.cos(v.heading), math.sin(v.heading)
    hl, hw = v.length / 2, v.width / 2
    local = ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))
    return np.array([(v.x + px * c - py * s, v.y + px * s + py * c) for px, py in local])


def detect_collision(a: VehicleState, b: VehicleState) -> bool:
    """Separating-axis test between the two oriented vehicle rectangles."""
    reach = 0.5 * (math.hypot(a.length, a.width) + math.hypot(b.length, b.width))
    if abs(a.x - b.x) > reach or abs(a.y - b.y) > reach:
        return False
    ca, cb = _corners(a), _corners(b)
    for h in (a.heading, b.heading):
        c, s = math.cos(h), math.sin(h)
        for axis in ((c, s), (-s, c)):
            pa = ca @ axis
            pb = cb @ axis
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


@dataclass(frozen=True)
class ScenarioConfig:
    vehicles_per_lane: int = 10
    ego_speed_range: tuple[float, float] = (23.0, 25.0)
    surrounding_speed_range: tuple[float, float] = (20.0, 23.0)
    spacing_range: tuple[float, float] = (25.0, 60.0)
    seed: int = 0

    def validate(self):
        if self.vehicles_per_lane < 0:
            raise ConfigError("vehicles_per_lane must be >= 0")
        for name in ("ego_speed_range", "surrounding_speed_range"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= MAX_SPEED:
                raise ConfigError(f"{name} must satisfy 0 <= lo <= hi <= {MAX_SPEED}, got {(lo, hi)}")
        lo, hi = self.spacing_range
        if lo > hi:
            raise ConfigError(f"spacing_range is empty: {self.spacing_range}")
        if lo <= VEHICLE_LENGTH:
            raise ConfigError(
                f"spacing_range minimum {lo} m cannot place vehicles of length "
                f"{VEHICLE_LENGTH} m without overlap")


@dataclass
class StepEvents:
    ego_collision: bool = False
    pairs: list = field(default_factory=list)


@dataclass
class WorldState:
    tick: int
    vehicles: list
    road: RoadConfig
    seed: int
    rng: np.random.Generator
    sim_hz: int = 20
    policy_hz: int = 1
    terminated: Optional[str] = None

    @property
    def time(self) -> float:
        return self.tick / self.sim_hz

    @property
    def ego(self) -> VehicleState:
        return self.vehicles[0]

    def vehicle(self, vehicle_id: int) -> VehicleState:
        for v in self.vehicles:
            if v.id == vehicle_id:
                return v
        raise KeyError(vehicle_id)

    def to_dict(self) -> dict:
        return {
            "tick": self.tick,
            "time": self.time,
            "seed": self.seed,
            "terminated": self.terminated,
            "vehicles": [v.to_dict() for v in self.vehicles],
        }


def spawn_scenario(road: RoadConfig, cfg: ScenarioConfig, sim_hz: int = 20,
                   policy_hz: int = 1) -> WorldState:
    """Ego in the middle lane at x = 0 with M vehicles ahead of it in every lane."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    ego_lane = (road.lane_count + 1) // 2
    v0 = float(rng.uniform(*cfg.ego_speed_range))
    vehicles = [VehicleState(id=0, role=EGO, x=0.0, y=road.lane_center(ego_lane), v1=v0,
                             lane=ego_lane, target_lane=ego_lane, target_speed=v0)]
    vid = 1
    for lane in range(1, road.lane_count + 1):
        x = 0.0
        for _ in range(cfg.vehicles_per_lane):
            x += float(rng.uniform(*cfg.spacing_range))
            v = float(rng.uniform(*cfg.surrounding_speed_range))
            vehicles.append(VehicleState(id=vid, role=SURROUNDING, x=x, y=road.lane_center(lane),
                                         v1=v, lane=lane, target_lane=lane, target_speed=v))
            vid += 1
    return WorldState(tick=0, vehicles=vehicles, road=road, seed=cfg.seed, rng=rng,
                      sim_hz=sim_hz, policy_hz=policy_hz)
