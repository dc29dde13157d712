"""Deterministic 2D top-down world: unicycle robot plus scripted agents."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.remainder(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    return a


def tick_time(tick: int, dt: float) -> float:
    """Simulated time of a tick; the rounding absorbs representation error
    (300 * 0.1 would otherwise read 30.000000000000004)."""
    return round(tick * dt, 9)


@dataclass(frozen=True)
class MotionCommand:
    v: float = 0.0
    omega: float = 0.0
    say: Optional[str] = None


STOP = MotionCommand()


@dataclass(frozen=True)
class RobotPose:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    linear_v: float = 0.0
    angular_v: float = 0.0


@dataclass(frozen=True)
class WaypointScript:
    """Piecewise-linear path given as ``(time_s, x, y)`` triples."""

    waypoints: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("waypoint script is empty")
        times = [w[0] for w in self.waypoints]
        for i in range(1, len(times)):
            if not times[i] > times[i - 1]:
                raise ValueError(
                    f"waypoint times must be strictly increasing (index {i}: {times[i]} after {times[i - 1]})"
                )


def agent_position_at(script: WaypointScript, t: float) -> Tuple[float, float]:
    wps = script.waypoints
    if not wps:
        raise ValueError("waypoint script is empty")
    if t <= wps[0][0]:
        return (wps[0][1], wps[0][2])
    if t >= wps[-1][0]:
        return (wps[-1][1], wps[-1][2])
    for (t0, x0, y0), (t1, x1, y1) in zip(wps, wps[1:]):
        if t0 <= t <= t1:
            u = (t - t0) / (t1 - t0)
            return (x0 + u * (x1 - x0), y0 + u * (y1 - y0))
    raise AssertionError("unreachable: time not bracketed")


@dataclass(frozen=True)
class AgentState:
    agent_id: int
    x: float
    y: float
    script: WaypointScript
    role: str = "passerby"
    hand_raised_interval: Optional[Tuple[float, float]] = None
    width_m: float = 0.5
    height_m: float = 1.7

    def hand_raised_at(self, t: float) -> bool:
        if self.hand_raised_interval is None:
            return False
        start, end = self.hand_raised_interval
        return start <= t < end


@dataclass(frozen=True)
class WorldState:
    dt: float
    robot: RobotPose = field(default_factory=RobotPose)
    agents: Tuple[AgentState, ...] = ()
    tick_index: int = 0

    @property
    def sim_time(self) -> float:
        # Derived from the tick counter so there is no accumulated drift.
        return tick_time(self.tick_index, self.dt)

    def agent(self, agent_id: int) -> AgentState:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)


def initial_world(agents: Sequence[AgentState], dt: float, robot: Optional[RobotPose] = None) -> WorldState:
    placed = tuple(
        replace(a, x=p[0], y=p[1])
        for a, p in ((a, agent_position_at(a.script, 0.0)) for a in agents)
    )
    return WorldState(dt=dt, robot=robot or RobotPose(), agents=placed, tick_index=0)


def step_world(world: WorldState, cmd: MotionCommand, dt: float) -> WorldState:
    """Advance one fixed tick: rotate, then translate along the new heading."""
    r = world.robot
    heading = normalize_angle(r.heading + cmd.omega * dt)
    robot = RobotPose(
        x=r.x + cmd.v * math.cos(heading) * dt,
        y=r.y + cmd.v * math.sin(heading) * dt,
        heading=heading,
        linear_v=cmd.v,
        angular_v=cmd.omega,
    )
    tick = world.tick_index + 1
    t = tick_time(tick, dt)
    agents = tuple(
        replace(a, x=p[0], y=p[1])
        for a, p in ((a, agent_position_at(a.script, t)) for a in world.agents)
    )
    return WorldState(dt=world.dt, robot=robot, agents=agents, tick_index=tick)
