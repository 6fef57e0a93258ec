"""Rule-based driving: IDM car following, MOBIL lane changes and the
proportional motion controllers that realise their targets."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import ConfigError, InvalidInputError
from .sim import MAX_HEADING, MAX_SPEED, VehicleState, WorldState

STANDARD = "standard"
PAPER = "paper"

KEEP, LEFT, RIGHT = "keep", "left", "right"

ACCEL_BOUND = 5.0      # |a1| limit of the motion controller, m/s^2
YAW_RATE_BOUND = MAX_HEADING
V_FLOOR = 1.0          # m/s, keeps the heading target finite at standstill
LANE_CHANGE_TOLERANCE = 0.5  # m from the target centerline before a new decision


@dataclass(frozen=True)
class IdmParams:
    a_max: float = 6.0
    delta: float = 4.0
    T: float = 1.5
    b: float = 5.0  # comfortable deceleration, stored as a positive magnitude
    d0: float = 10.0
    v_tar: float = 25.0
    formula_mode: str = STANDARD

    def __post_init__(self):
        if self.a_max <= 0 or self.b <= 0 or self.d0 <= 0 or self.T < 0:
            raise ConfigError(f"invalid IDM parameters {self}")
        if not 0 < self.v_tar <= MAX_SPEED:
            raise ConfigError(f"v_tar must lie in (0, {MAX_SPEED}], got {self.v_tar}")
        if self.formula_mode not in (STANDARD, PAPER):
            raise ConfigError(f"formula_mode must be 'standard' or 'paper', got {self.formula_mode!r}")


@dataclass(frozen=True)
class MobilParams:
    z: float = 0.001
    b_safe: float = 2.0
    a_th: float = 0.2

    def __post_init__(self):
        if self.z < 0 or self.b_safe <= 0 or self.a_th < 0:
            raise ConfigError(f"invalid MOBIL parameters {self}")


@dataclass(frozen=True)
class ControlGains:
    k_p: float = 5.0 / 3.0
    k_p_lat: float = 1.0
    k_p_heading: float = 2.0

    def __post_init__(self):
        if min(self.k_p, self.k_p_lat, self.k_p_heading) <= 0:
            raise ConfigError(f"controller gains must be positive: {self}")


@dataclass(frozen=True)
class DriverParams:
    idm: IdmParams = IdmParams()
    mobil: MobilParams = MobilParams()
    gains: ControlGains = ControlGains()


class LaneChangeDecision(NamedTuple):
    choice: str
    incentive_gain: float
    target_lane: int


class ReferenceControl(NamedTuple):
    a1: float
    yaw_rate: float
    target_lane: int


def desired_gap(v: float, dv: float, p: IdmParams) -> float:
    brake = v * dv / (2.0 * math.sqrt(p.a_max * p.b))
    if p.formula_mode == PAPER:
        return p.d0 + p.T * dv + brake
    return p.d0 + max(0.0, v * p.T + brake)


def idm_acceleration(v: float, dv: float, gap: Optional[float], p: IdmParams,
                     v_tar: Optional[float] = None) -> float:
    """IDM acceleration; ``dv = v - v_leader`` and ``gap`` is bumper to bumper.

    ``gap=None`` means free road. ``v_tar`` overrides ``p.v_tar`` so one
    parameter set can serve vehicles with individual target speeds.
    """
    v_tar = p.v_tar if v_tar is None else v_tar
    acc = 1.0 - (max(v, 0.0) / v_tar) ** p.delta
    if gap is not None:
        if not gap > 0:
            raise InvalidInputError(f"gap to leader must be positive, got {gap}")
        acc -= (desired_gap(v, dv, p) / gap) ** 2
    acc *= p.a_max
    return min(max(acc, -p.a_max), p.a_max)


def mobil_safety(a_new_follower: float, p: MobilParams) -> bool:
    return a_new_follower >= -p.b_safe


def mobil_incentive(ego_new: float, ego_old: float,
                    i_new: Optional[float], i_old: Optional[float],
                    j_new: Optional[float], j_old: Optional[float],
                    p: MobilParams) -> tuple[bool, float]:
    """Politeness-weighted acceleration gain of a lane change.

    ``i`` is the follower in the current lane, ``j`` the follower in the
    target lane; pass ``None`` for an absent follower.
    """
    di = 0.0 if i_new is None or i_old is None else i_new - i_old
    dj = 0.0 if j_new is None or j_old is None else j_new - j_old
    gain = (ego_new - ego_old) + p.z * (di + dj)
    return gain > p.a_th, gain


def longitudinal_control(v_tar: float, v: float, g: ControlGains) -> float:
    a = g.k_p * (v_tar - v)
    return min(max(a, -ACCEL_BOUND), ACCEL_BOUND)


def lateral_control(y: float, target_lane_center: float, heading: float, v: float,
                    g: ControlGains) -> float:
    """Yaw-rate command steering toward a lane centerline."""
    v_lat = -g.k_p_lat * (y - target_lane_center)
    ratio = min(max(v_lat / max(v, V_FLOOR), -1.0), 1.0)
    heading_tar = min(max(math.asin(ratio), -MAX_HEADING), MAX_HEADING)
    yaw_rate = g.k_p_heading * (heading_tar - heading)
    return min(max(yaw_rate, -YAW_RATE_BOUND), YAW_RATE_BOUND)


def gap_between(follower: VehicleState, leader: VehicleState) -> float:
    return leader.x - follower.x - 0.5 * (leader.length + follower.length)


def follow_acceleration(follower: VehicleState, leader: Optional[VehicleState],
                        p: IdmParams) -> float:
    """IDM acceleration of ``follower`` behind ``leader``; full braking on overlap."""
    v_tar = max(follower.target_speed, V_FLOOR)
    if leader is None:
        return idm_acceleration(follower.v1, 0.0, None, p, v_tar)
    gap = gap_between(follower, leader)
    if gap <= 0:
        return -p.a_max
    return idm_acceleration(follower.v1, follower.v1 - leader.v1, gap, p, v_tar)


def lane_neighbors(vehicles, lane: int, x: float, exclude_id: int):
    """Closest vehicle ahead of and behind position ``x`` in ``lane``."""
    leader = follower = None
    for v in vehicles:
        if v.id == exclude_id or v.lane != lane:
            continue
        if v.x >= x:
            if leader is None or v.x < leader.x:
                leader = v
        elif follower is None or v.x > follower.x:
            follower = v
    return leader, follower


def mobil_decision(world: WorldState, vehicle_id: int, idm: IdmParams,
                   mobil: MobilParams) -> LaneChangeDecision:
    me = world.vehicle(vehicle_id)
    road = world.road
    if abs(me.y - road.lane_center(me.target_lane)) > LANE_CHANGE_TOLERANCE:
        return LaneChangeDecision(KEEP, 0.0, me.target_lane)

    vehicles = world.vehicles
    lane = me.lane
    old_leader, old_follower = lane_neighbors(vehicles, lane, me.x, me.id)
    ego_old = follow_acceleration(me, old_leader, idm)
    i_old = i_new = None
    if old_follower is not None:
        i_old = follow_acceleration(old_follower, me, idm)
        i_new = follow_acceleration(old_follower, old_leader, idm)

    best = LaneChangeDecision(KEEP, 0.0, lane)
    for choice, new_lane in ((LEFT, lane - 1), (RIGHT, lane + 1)):
        if not 1 <= new_lane <= road.lane_count:
            continue
        new_leader, new_follower = lane_neighbors(vehicles, new_lane, me.x, me.id)
        if new_leader is not None and gap_between(me, new_leader) <= 0:
            continue
        j_old = j_new = None
        if new_follower is not None:
            if gap_between(new_follower, me) <= 0:
                continue
            j_new = follow_acceleration(new_follower, me, idm)
            if not mobil_safety(j_new, mobil):
                continue
            j_old = follow_acceleration(new_follower, new_leader, idm)
        ego_new = follow_acceleration(me, new_leader, idm)
        ok, gain = mobil_incentive(ego_new, ego_old, i_new, i_old, j_new, j_old, mobil)
        # strict comparison keeps LEFT on equal gains
        if ok and (best.choice == KEEP or gain > best.incentive_gain):
            best = LaneChangeDecision(choice, gain, new_lane)
    return best


def reference_policy(world: WorldState, vehicle_id: int, params: DriverParams = DriverParams(),
                     decide_lane: bool = True) -> ReferenceControl:
    """IDM + MOBIL upper level feeding the proportional lower level.

    With ``decide_lane=False`` the vehicle keeps its current target lane
    (lane decisions run at the policy rate, controls at every tick).
    """
    me = world.vehicle(vehicle_id)
    target_lane = me.target_lane
    if decide_lane:
        target_lane = mobil_decision(world, vehicle_id, params.idm, params.mobil).target_lane
    leader, _ = lane_neighbors(world.vehicles, me.lane, me.x, me.id)
    a1 = follow_acceleration(me, leader, params.idm)
    if target_lane != me.lane:
        # while merging also respect the leader in the destination lane
        leader, _ = lane_neighbors(world.vehicles, target_lane, me.x, me.id)
        a1 = min(a1, follow_acceleration(me, leader, params.idm))
    yaw_rate = lateral_control(me.y, world.road.lane_center(target_lane), me.heading, me.v1,
                               params.gains)
    return ReferenceControl(a1, yaw_rate, target_lane)
