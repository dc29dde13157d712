import math

import pytest

from followsim.perception import CameraModel, ImageBox
from followsim.world import AgentState, RobotPose, WaypointScript


@pytest.fixture
def cam():
    return CameraModel()


def make_agent(agent_id=1, x=2.5, y=0.0, *, waypoints=None, hand=None, role="user"):
    script = WaypointScript(tuple(waypoints) if waypoints else ((0.0, x, y),))
    return AgentState(agent_id, script.waypoints[0][1], script.waypoints[0][2], script, role, hand)


def box_xyxy(x1, y1, x2, y2):
    return ImageBox.from_xyxy(x1, y1, x2, y2)


ORIGIN = RobotPose()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
