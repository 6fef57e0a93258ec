import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from highway_overtake.sim import EGO, SURROUNDING, RoadConfig, VehicleState, WorldState


def make_world(vehicles, road=None, tick=0):
    road = road or RoadConfig()
    return WorldState(tick=tick, vehicles=list(vehicles), road=road, seed=0,
                      rng=np.random.default_rng(0))


def car(id, x, lane, v, target_speed=None, role=None, road=None):
    road = road or RoadConfig()
    return VehicleState(id=id, role=role or (EGO if id == 0 else SURROUNDING), x=x,
                        y=road.lane_center(lane), v1=v, lane=lane, target_lane=lane,
                        target_speed=v if target_speed is None else target_speed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
