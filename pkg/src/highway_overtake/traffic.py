"""Tick-level world advancement."""
from __future__ import annotations

from dataclasses import replace

from .drivers import DriverParams, reference_policy
from .errors import InvalidInputError, StateError
from .sim import EGO, StepEvents, WorldState, detect_collision, step_kinematics

COLLISION = "collision"
HORIZON = "horizon"
DESTINATION = "destination"


def decision_period(world: WorldState) -> int:
    """Simulation ticks per policy step."""
    return world.sim_hz // world.policy_hz


def advance_world(world: WorldState, ego_controls, dt: float | None = None,
                  params: DriverParams = DriverParams()) -> tuple[WorldState, StepEvents]:
    """Advance every vehicle by one simulation tick.

    Surrounding vehicles follow the reference IDM/MOBIL stack (lane
    decisions only on policy-step boundaries); the ego applies
    ``ego_controls = (a1, yaw_rate)``. The world is updated in place and
    returned together with the tick's collision events; an ego collision
    terminates it.
    """
    if world.terminated is not None:
        raise StateError(f"world already terminated ({world.terminated})")
    tick_dt = 1.0 / world.sim_hz
    if dt is not None and abs(dt - tick_dt) > 1e-12:
        raise InvalidInputError(f"dt={dt} does not match the {world.sim_hz} Hz tick")

    decide = world.tick % decision_period(world) == 0
    a1_ego, yaw_ego = ego_controls
    # all controls come from the same snapshot before anything moves
    controls = []
    for v in world.vehicles:
        if v.role == EGO:
            controls.append((float(a1_ego), float(yaw_ego), v.target_lane))
        else:
            controls.append(reference_policy(world, v.id, params, decide_lane=decide))

    moved = []
    for v, (a1, yaw, target_lane) in zip(world.vehicles, controls):
        if target_lane != v.target_lane:
            v = replace(v, target_lane=target_lane)
        moved.append(step_kinematics(v, a1, yaw, tick_dt, world.road))
    world.vehicles = moved
    world.tick += 1

    events = StepEvents()
    n = len(moved)
    for i in range(n):
        for j in range(i + 1, n):
            if detect_collision(moved[i], moved[j]):
                events.pairs.append((moved[i].id, moved[j].id))
                if moved[i].role == EGO or moved[j].role == EGO:
                    events.ego_collision = True
    if events.ego_collision:
        world.terminated = COLLISION
    return world, events
