"""The two halves of a trial.

``RobotServer`` owns the world and the robot; ``PerceptionClient`` owns the
detector, tracker and follower behavior. They exchange plain dictionaries so
the same objects run either wired together in-process or across a socket.
"""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .behavior import BehaviorState, FrameGeometry, Phase, behavior_step
from .perception import FrameObservation, ImageBox, detect, render_frame
from .results import ABORTED, TraceFrame, TrialResult, classify_outcome
from .scenario import Scenario
from .tracking.trackers import EgoMotionHint, Tracker, TrackerParams
from .world import MotionCommand, WorldState, step_world, tick_time


def _clamp(x: float, bound: float) -> float:
    return max(-bound, min(bound, x))


class RobotServer:
    def __init__(self, scenario: Scenario, tracker_kind: str, seed: int):
        self.scenario = scenario
        self.tracker_kind = tracker_kind
        self.seed = seed
        self.cam = scenario.camera
        self.world: WorldState = scenario.initial_world()
        self.trace = []
        self.done = False
        self._pending: Optional[dict] = None

    def frame(self) -> dict:
        assert not self.done and self._pending is None, "FRAME emitted before previous COMMAND"
        obs = render_frame(self.world, self.cam)
        self._pending = {a.agent_id: a.box for a in obs.agents}
        return {
            "tick_index": self.world.tick_index,
            "observation": obs,
            "ego": {"omega_applied_last_tick": self.world.robot.angular_v, "dt": self.scenario.dt},
        }

    def apply(self, tick_index: int, command: dict, status: dict) -> None:
        if self._pending is None or tick_index != self.world.tick_index:
            raise AssertionError(f"COMMAND for tick {tick_index} does not answer FRAME {self.world.tick_index}")
        box = status.get("target_box")
        self.trace.append(
            TraceFrame(
                tick=tick_index,
                phase=status["phase"],
                failure_cause=status.get("failure_cause"),
                target_box=None if box is None else ImageBox.from_list(box),
                occluded_frames=status["occluded_frames"],
                activation_time_s=status.get("activation_time_s"),
                gt_boxes=self._pending,
            )
        )
        self._pending = None
        terminal = status["phase"] in (Phase.ARRIVED.value, Phase.FAILED.value)
        if terminal or tick_index >= self.scenario.max_ticks:
            self.done = True
            return
        c = self.scenario.control
        cmd = MotionCommand(_clamp(float(command["v"]), c.v_max), _clamp(float(command["omega"]), c.omega_max))
        self.world = step_world(self.world, cmd, self.scenario.dt)

    def user_distance(self) -> Optional[float]:
        uid = self.scenario.user_id
        if uid is None:
            return None
        u, r = self.world.agent(uid), self.world.robot
        return math.hypot(u.x - r.x, u.y - r.y)

    def result(self) -> TrialResult:
        outcome, cause = classify_outcome(self.trace, self.scenario.user_id)
        last = self.trace[-1]
        return TrialResult(
            scenario_id=self.scenario.scenario_id,
            distance_m=self.scenario.activation_distance,
            tracker_kind=self.tracker_kind,
            seed=self.seed,
            outcome=outcome,
            failure_cause=cause,
            duration_s=tick_time(last.tick, self.scenario.dt),
            occluded_frames=last.occluded_frames,
            activation_time_s=last.activation_time_s,
            final_robot_user_distance_m=self.user_distance(),
        )


class PerceptionClient:
    def __init__(self, scenario: Scenario, tracker_kind: str, seed: int):
        self.scenario = scenario
        self.tracker_kind = tracker_kind
        self.seed = seed
        cam = scenario.camera
        self.rng = np.random.default_rng(seed)
        self.tracker = Tracker(tracker_kind, TrackerParams(max_age=scenario.control.patience_frames), cam)
        self.geo = FrameGeometry.from_camera(cam)
        self.state = BehaviorState()
        self.last_tick = -1

    def step(self, frame: dict) -> Tuple[dict, dict]:
        tick = frame["tick_index"]
        obs = frame["observation"]
        if isinstance(obs, dict):
            obs = FrameObservation.from_dict(obs)
        ego = EgoMotionHint(float(frame["ego"]["omega_applied_last_tick"]), float(frame["ego"]["dt"]))
        dets = detect(obs, self.scenario.noise, self.rng)
        tracks = self.tracker.update(dets, ego, frame_index=tick)
        _, cmd = behavior_step(self.state, tracks, None, self.scenario.dt, self.scenario.control, self.geo)
        self.last_tick = tick
        return {"v": cmd.v, "omega": cmd.omega, "say": cmd.say}, self.status()

    def status(self) -> dict:
        s = self.state
        return {
            "phase": s.phase.value,
            "failure_cause": s.failure_cause,
            "target_track_id": s.target_track_id,
            "target_box": None if s.visible_target_box is None else s.visible_target_box.to_list(),
            "occluded_frames": s.occluded_total,
            "activation_time_s": s.activation_time_s,
        }

    def aborted_result(self) -> TrialResult:
        return TrialResult(
            scenario_id=self.scenario.scenario_id,
            distance_m=self.scenario.activation_distance,
            tracker_kind=self.tracker_kind,
            seed=self.seed,
            outcome=ABORTED,
            failure_cause=None,
            duration_s=tick_time(max(self.last_tick, 0), self.scenario.dt),
            occluded_frames=self.state.occluded_total,
            activation_time_s=self.state.activation_time_s,
            final_robot_user_distance_m=None,
        )


def run_in_process(scenario: Scenario, tracker_kind: str, seed: int, keep: Optional[dict] = None) -> TrialResult:
    """Wire server and client function-to-function with no serialization."""
    server = RobotServer(scenario, tracker_kind, seed)
    client = PerceptionClient(scenario, tracker_kind, seed)
    while not server.done:
        frame = server.frame()
        cmd, status = client.step(frame)
        server.apply(frame["tick_index"], cmd, status)
    if keep is not None:
        keep["server"], keep["client"] = server, client
    return server.result()
