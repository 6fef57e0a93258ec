# Car following and lane changing, one formula at a time.
from dataclasses import replace

import numpy as np

from highway_overtake.drivers import (ControlGains, IdmParams, MobilParams, desired_gap,
                                      idm_acceleration, lateral_control, mobil_decision,
                                      mobil_incentive, reference_policy)
from highway_overtake.sim import EGO, SURROUNDING, RoadConfig, VehicleState, WorldState, \
    step_kinematics
from highway_overtake.traffic import advance_world

idm = IdmParams()
mobil = MobilParams()

# desired gap grows with speed in the standard form; the alternative form ignores speed
for v in (0, 10, 20, 30):
    print(v, desired_gap(v, 0, idm), desired_gap(v, 0, IdmParams(formula_mode="paper")))

# free road: full throttle at standstill, zero at the target speed
speeds = np.linspace(0, 40, 9)
print([round(idm_acceleration(v, 0, None, idm), 3) for v in speeds])

# closing in on a leader 60 m ahead at equal speed
print(idm_acceleration(20, 0, 60, idm))  # ~0.876

# braking grows as the gap shrinks
for gap in (80, 40, 20, 10, 5):
    print(gap, round(idm_acceleration(25, 5, gap, idm), 3))

# MOBIL: gain from escaping a braking situation, no followers involved
print(mobil_incentive(0.876, -2.0, None, None, None, None, mobil))


def car(i, x, lane, v):
    y = RoadConfig().lane_center(lane)
    return VehicleState(id=i, role=EGO if i == 0 else SURROUNDING, x=x, y=y, v1=v, lane=lane,
                        target_lane=lane, target_speed=v)


# a slow car ahead, lane 1 blocked as well, lane 3 free
world = WorldState(0, [car(0, 0, 2, 25), car(1, 20, 2, 15), car(2, 25, 1, 15)], RoadConfig(),
                   0, np.random.default_rng(0))
print(mobil_decision(world, 0, idm, mobil))

# the lateral controller carries a car from lane 2 to lane 1 in a few seconds
s = car(0, 0, 2, 25)
ys = []
for _ in range(100):
    s = step_kinematics(s, 0.0, lateral_control(s.y, 0.0, s.heading, s.v1, ControlGains()), 0.05)
    ys.append(s.y)
print(np.round(ys[::10], 3))

# surrounding traffic is just these pieces, ticked at 20 Hz; here the ego uses them too
for _ in range(40):
    ctl = reference_policy(world, 0, decide_lane=world.tick % 20 == 0)
    world.vehicles[0] = replace(world.vehicles[0], target_lane=ctl.target_lane)
    advance_world(world, (ctl.a1, ctl.yaw_rate))
print([(v.id, v.lane, round(v.x, 1), round(v.v1, 2)) for v in world.vehicles])
