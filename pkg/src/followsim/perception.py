"""Synthetic stand-in for the pose detector.

World geometry is projected through a pinhole camera; nearer people occlude
farther ones along the image x-axis, and a seeded noise model produces
ID-free detections with four keypoints each.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .world import AgentState, RobotPose, WorldState, normalize_angle

KEYPOINT_NAMES = ("left_shoulder", "right_shoulder", "left_wrist", "right_wrist")
MIN_RANGE_M = 0.2
DETECTION_FLOOR = 0.01


@dataclass(frozen=True)
class CameraModel:
    width_px: int = 160
    height_px: int = 120
    hfov: float = math.radians(60.0)
    fps: float = 10.0

    @property
    def focal_px(self) -> float:
        return (self.width_px / 2.0) / math.tan(self.hfov / 2.0)

    @property
    def frame_area(self) -> float:
        return float(self.width_px * self.height_px)


@dataclass(frozen=True)
class ImageBox:
    cx: float
    cy: float
    w: float
    h: float

    @property
    def x1(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def x2(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def y2(self) -> float:
        return self.cy + self.h / 2.0

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> "ImageBox":
        return cls((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)

    def clipped_area(self, width_px: float, height_px: float) -> float:
        w = max(0.0, min(self.x2, width_px) - max(self.x1, 0.0))
        h = max(0.0, min(self.y2, height_px) - max(self.y1, 0.0))
        return w * h

    def to_list(self) -> List[float]:
        return [self.cx, self.cy, self.w, self.h]

    @classmethod
    def from_list(cls, v: Sequence[float]) -> "ImageBox":
        cx, cy, w, h = v
        return cls(float(cx), float(cy), float(w), float(h))


@dataclass(frozen=True)
class ObservedAgent:
    agent_id: int
    box: Optional[ImageBox]  # None when outside the field of view or too close
    distance_m: float
    occlusion_fraction: float
    hand_raised_truth: bool


@dataclass(frozen=True)
class FrameObservation:
    tick_index: int
    agents: Tuple[ObservedAgent, ...] = ()

    def to_dict(self) -> dict:
        return {
            "tick_index": self.tick_index,
            "agents": [
                {
                    "agent_id": a.agent_id,
                    "box": None if a.box is None else a.box.to_list(),
                    "distance_m": a.distance_m,
                    "occlusion_fraction": a.occlusion_fraction,
                    "hand_raised_truth": a.hand_raised_truth,
                }
                for a in self.agents
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameObservation":
        return cls(
            tick_index=int(d["tick_index"]),
            agents=tuple(
                ObservedAgent(
                    agent_id=int(a["agent_id"]),
                    box=None if a["box"] is None else ImageBox.from_list(a["box"]),
                    distance_m=float(a["distance_m"]),
                    occlusion_fraction=float(a["occlusion_fraction"]),
                    hand_raised_truth=bool(a["hand_raised_truth"]),
                )
                for a in d["agents"]
            ),
        )


@dataclass(frozen=True)
class Detection:
    box: ImageBox
    confidence: float
    keypoints: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    # Ground truth for scoring only; trackers and behavior must not read it.
    truth_agent_id: Optional[int] = None


@dataclass(frozen=True)
class NoiseParams:
    box_jitter_sigma_px: float = 1.0
    confidence_base: float = 0.9
    confidence_noise_sigma: float = 0.05
    drop_occlusion_threshold: float = 0.7
    min_confidence: float = 0.1

    def __post_init__(self):
        if self.box_jitter_sigma_px < 0 or self.confidence_noise_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        for name in ("confidence_base", "drop_occlusion_threshold", "min_confidence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


ZERO_NOISE = NoiseParams(box_jitter_sigma_px=0.0, confidence_noise_sigma=0.0)


def project_agent(robot: RobotPose, agent: AgentState, cam: CameraModel) -> Optional[ImageBox]:
    dx, dy = agent.x - robot.x, agent.y - robot.y
    d = math.hypot(dx, dy)
    if d < MIN_RANGE_M:
        return None
    bearing = normalize_angle(math.atan2(dy, dx) - robot.heading)  # left positive
    if abs(bearing) >= cam.hfov / 2.0:
        return None
    f = cam.focal_px
    return ImageBox(
        cx=cam.width_px / 2.0 - f * math.tan(bearing),
        cy=cam.height_px / 2.0,
        w=f * agent.width_m / d,
        h=f * agent.height_m / d,
    )


def _union_length(intervals: Sequence[Tuple[float, float]]) -> float:
    total = 0.0
    cur_lo = cur_hi = None
    for lo, hi in sorted(intervals):
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        else:
            cur_hi = max(cur_hi, hi)
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def occluded_fraction(occluders: Sequence[ImageBox], far: ImageBox) -> float:
    """Share of ``far``'s x-extent covered by the union of the occluders."""
    extent = far.x2 - far.x1  # same rounding as the clipped pieces
    if extent <= 0:
        return 0.0
    pieces = []
    for near in occluders:
        lo, hi = max(near.x1, far.x1), min(near.x2, far.x2)
        if hi > lo:
            pieces.append((lo, hi))
    return min(1.0, max(0.0, _union_length(pieces) / extent))


def occlusion_fraction(near: ImageBox, far: ImageBox) -> float:
    return occluded_fraction([near], far)


def render_frame(world: WorldState, cam: CameraModel) -> FrameObservation:
    t = world.sim_time
    rows = []
    for a in world.agents:
        d = math.hypot(a.x - world.robot.x, a.y - world.robot.y)
        rows.append((d, a.agent_id, a, project_agent(world.robot, a, cam)))
    rows.sort(key=lambda r: (r[0], r[1]))

    observed = []
    for i, (d, aid, agent, box) in enumerate(rows):
        frac = 0.0
        if box is not None:
            nearer = [r[3] for r in rows[:i] if r[3] is not None and r[0] < d]
            frac = occluded_fraction(nearer, box)
        observed.append(ObservedAgent(aid, box, d, frac, agent.hand_raised_at(t)))
    return FrameObservation(tick_index=world.tick_index, agents=tuple(observed))


def keypoints_for(box: ImageBox, raised: bool) -> Dict[str, Tuple[float, float]]:
    top = box.y1
    shoulder_y = top + 0.20 * box.h
    wrist_y = top + (0.05 if raised else 0.55) * box.h
    return {
        "left_shoulder": (box.cx - 0.20 * box.w, shoulder_y),
        "right_shoulder": (box.cx + 0.20 * box.w, shoulder_y),
        "left_wrist": (box.cx - 0.30 * box.w, wrist_y),
        "right_wrist": (box.cx + 0.30 * box.w, wrist_y),
    }


def detect(obs: FrameObservation, noise: NoiseParams, rng: np.random.Generator) -> List[Detection]:
    """Turn an observation into detections, consuming ``rng`` in agent order.

    Each kept agent draws four corner offsets and one confidence offset, so the
    stream position depends only on which agents pass the occlusion rule.
    """
    out = []
    for a in obs.agents:
        if a.box is None or a.occlusion_fraction > noise.drop_occlusion_threshold:
            continue
        jitter = rng.standard_normal(4) * noise.box_jitter_sigma_px
        conf_noise = rng.standard_normal() * noise.confidence_noise_sigma
        b = a.box
        if noise.box_jitter_sigma_px > 0:
            x1, y1 = b.x1 + jitter[0], b.y1 + jitter[1]
            # Keep the jittered box non-degenerate.
            x2 = max(b.x2 + jitter[2], x1 + 1e-3)
            y2 = max(b.y2 + jitter[3], y1 + 1e-3)
            box = ImageBox.from_xyxy(float(x1), float(y1), float(x2), float(y2))
        else:
            box = b
        conf = noise.confidence_base * (1.0 - a.occlusion_fraction) + conf_noise
        conf = min(1.0, max(0.0, float(conf)))
        if conf <= DETECTION_FLOOR:
            continue
        out.append(
            Detection(
                box=box,
                confidence=conf,
                keypoints=keypoints_for(b, a.hand_raised_truth),
                truth_agent_id=a.agent_id,
            )
        )
    return out
