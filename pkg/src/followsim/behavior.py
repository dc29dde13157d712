"""Follower state machine: hand-raise activation, centring, approach,
occlusion recovery, stop-and-greet and timeouts."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .perception import CameraModel, Detection, ImageBox
from .tracking.trackers import Track
from .world import STOP, MotionCommand, tick_time

ACTIVATION_PHRASE = "target detected"
GREETING_PHRASE = "Hello, can I help you?"


class Phase(str, enum.Enum):
    IDLE = "Idle"
    TRACKING = "Tracking"
    APPROACH = "Approach"
    OCCLUDED = "Occluded"
    ARRIVED = "Arrived"
    FAILED = "Failed"


@dataclass(frozen=True)
class ControlParams:
    n_adjust: float = 0.9
    omega_max: float = 1.0
    v_max: float = 0.35
    k_v: float = 0.02
    r_stop: float = 0.30
    center_tol_px: float = 16.0
    raise_frames_K: int = 5
    patience_frames: int = 30
    activation_timeout_s: float = 30.0
    search_omega: float = 0.3

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            if not getattr(self, name) > 0:
                raise ValueError(f"control parameter {name} must be positive")


@dataclass(frozen=True)
class FrameGeometry:
    frame_width_px: int = 160
    frame_height_px: int = 120

    @property
    def x_frame_centre(self) -> float:
        return self.frame_width_px / 2.0

    @property
    def frame_area(self) -> float:
        return float(self.frame_width_px * self.frame_height_px)

    @classmethod
    def from_camera(cls, cam: CameraModel) -> "FrameGeometry":
        return cls(cam.width_px, cam.height_px)


@dataclass
class BehaviorState:
    phase: Phase = Phase.IDLE
    resume_to: Optional[Phase] = None
    failure_cause: Optional[str] = None
    target_track_id: Optional[int] = None
    raise_counters: Dict[int, int] = field(default_factory=dict)
    occluded_counter: int = 0
    occluded_total: int = 0
    last_target_box: Optional[ImageBox] = None
    # Box of the target in the current frame, None when it was not seen.
    visible_target_box: Optional[ImageBox] = None
    elapsed_s: float = 0.0
    frame: int = 0
    activation_time_s: Optional[float] = None
    speech_log: List[Tuple[float, str]] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return self.phase in (Phase.ARRIVED, Phase.FAILED)


def detect_hand_raise(d: Detection) -> bool:
    kp = d.keypoints
    wrist = min(kp["left_wrist"][1], kp["right_wrist"][1])
    shoulder = min(kp["left_shoulder"][1], kp["right_shoulder"][1])
    return wrist < shoulder  # image y grows downward


def update_activation(
    state: BehaviorState,
    tracks: Sequence[Track],
    dets_by_track: Mapping[int, Detection],
    p: ControlParams,
) -> BehaviorState:
    assert state.phase is Phase.IDLE
    counters = {}
    for t in tracks:
        d = dets_by_track.get(t.track_id)
        if d is not None and detect_hand_raise(d):
            counters[t.track_id] = state.raise_counters.get(t.track_id, 0) + 1
    ready = [tid for tid, n in counters.items() if n >= p.raise_frames_K]
    if ready:
        target = min(ready, key=lambda tid: (-dets_by_track[tid].confidence, tid))
        state.target_track_id = target
        state.last_target_box = next(t.box for t in tracks if t.track_id == target)
        state.phase = Phase.TRACKING
        state.activation_time_s = state.elapsed_s
        state.speech_log.append((state.elapsed_s, ACTIVATION_PHRASE))
        counters = {}
    state.raise_counters = counters
    return state


def angular_velocity(box: ImageBox, geo: FrameGeometry, p: ControlParams) -> float:
    """Turn rate toward the box centre; positive turns anti-clockwise."""
    w = (geo.x_frame_centre - box.cx) / geo.frame_width_px * p.n_adjust * p.omega_max
    return max(-p.omega_max, min(p.omega_max, w))


def area_ratio(box: ImageBox, geo: FrameGeometry) -> float:
    r = box.clipped_area(geo.frame_width_px, geo.frame_height_px) / geo.frame_area
    return max(0.0, min(1.0, r))


def linear_velocity(ratio: float, p: ControlParams) -> float:
    if ratio >= p.r_stop:
        return 0.0
    if ratio <= 0.0:
        return p.v_max
    return min(p.v_max, p.k_v / ratio)


def recovery_turn_direction(last_box: ImageBox, geo: FrameGeometry, p: Optional[ControlParams] = None) -> float:
    """Search turn toward the side where the target was last seen."""
    p = p or ControlParams()
    if last_box.cx > geo.x_frame_centre:
        return -p.search_omega
    return p.search_omega


def _follow(state: BehaviorState, box: ImageBox, p: ControlParams, geo: FrameGeometry) -> MotionCommand:
    omega = angular_velocity(box, geo, p)
    if state.phase is Phase.TRACKING:
        if abs(box.cx - geo.x_frame_centre) <= p.center_tol_px:
            state.phase = Phase.APPROACH
        return MotionCommand(0.0, omega)
    v = linear_velocity(area_ratio(box, geo), p)
    if v == 0.0:
        state.phase = Phase.ARRIVED
        state.speech_log.append((state.elapsed_s, GREETING_PHRASE))
        return MotionCommand(0.0, 0.0, GREETING_PHRASE)
    return MotionCommand(v, omega)


def _lose_frame(state: BehaviorState, p: ControlParams, geo: FrameGeometry) -> MotionCommand:
    state.occluded_counter += 1
    state.occluded_total += 1
    if state.occluded_counter >= p.patience_frames:
        state.phase = Phase.FAILED
        state.failure_cause = "lost"
        return STOP
    return MotionCommand(0.0, recovery_turn_direction(state.last_target_box, geo, p))


def behavior_step(
    state: BehaviorState,
    tracks: Sequence[Track],
    dets_by_track: Optional[Mapping[int, Detection]],
    dt: float,
    p: ControlParams,
    geo: FrameGeometry,
) -> Tuple[BehaviorState, MotionCommand]:
    """Advance the follower by one frame (in place) and return its command."""
    if dets_by_track is None:
        dets_by_track = {t.track_id: t.last_detection for t in tracks if t.last_detection is not None}
    state.elapsed_s = tick_time(state.frame, dt)
    state.frame += 1
    state.visible_target_box = None

    if state.terminal:
        return state, STOP

    if state.phase is Phase.IDLE:
        update_activation(state, tracks, dets_by_track, p)
        if state.phase is Phase.TRACKING:
            return state, MotionCommand(0.0, 0.0, ACTIVATION_PHRASE)
        # Integer tick comparison keeps the window exact under float dt.
        if state.frame - 1 >= round(p.activation_timeout_s / dt):
            state.phase = Phase.FAILED
            state.failure_cause = "timeout"
        return state, STOP

    target = next((t for t in tracks if t.track_id == state.target_track_id), None)
    if target is not None:
        state.visible_target_box = target.box
        state.last_target_box = target.box
        if state.phase is Phase.OCCLUDED:
            state.phase = state.resume_to
            state.resume_to = None
            state.occluded_counter = 0
        return state, _follow(state, target.box, p, geo)

    if state.phase in (Phase.TRACKING, Phase.APPROACH):
        state.resume_to = state.phase
        state.phase = Phase.OCCLUDED
        state.occluded_counter = 0
    return state, _lose_frame(state, p, geo)
