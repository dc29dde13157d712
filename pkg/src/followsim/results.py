"""Trial results and ground-truth outcome classification."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from .perception import ImageBox
from .tracking.geometry import iou

SUCCESS = "Success"
FAILURE = "Failure"
ABORTED = "Aborted"
FAILURE_CAUSES = ("timeout", "lost", "id_switch")


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrialResult:
    scenario_id: str
    distance_m: float
    tracker_kind: str
    seed: int
    outcome: str
    failure_cause: Optional[str]
    duration_s: float
    occluded_frames: int
    activation_time_s: Optional[float]
    final_robot_user_distance_m: Optional[float]

    def __post_init__(self):
        if self.outcome not in (SUCCESS, FAILURE, ABORTED):
            raise ValueError(f"bad outcome {self.outcome!r}")
        if (self.outcome == FAILURE) != (self.failure_cause is not None):
            raise ValueError("failure_cause is set exactly when outcome is Failure")
        if self.failure_cause is not None and self.failure_cause not in FAILURE_CAUSES:
            raise ValueError(f"bad failure cause {self.failure_cause!r}")

    @property
    def success(self) -> bool:
        return self.outcome == SUCCESS

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrialResult":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


@dataclass(frozen=True)
class TraceFrame:
    tick: int
    phase: str
    failure_cause: Optional[str]
    target_box: Optional[ImageBox]
    occluded_frames: int
    activation_time_s: Optional[float]
    gt_boxes: Dict[int, Optional[ImageBox]] = field(default_factory=dict)


def best_match(box: ImageBox, gt_boxes: Mapping[int, Optional[ImageBox]]) -> Optional[int]:
    """Agent whose true box has strictly the highest positive IoU with ``box``."""
    scored = sorted(
        ((iou(box, b), aid) for aid, b in gt_boxes.items() if b is not None),
        key=lambda s: (-s[0], s[1]),
    )
    if not scored or scored[0][0] <= 0.0:
        return None
    if len(scored) > 1 and scored[1][0] >= scored[0][0]:
        return None
    return scored[0][1]


def classify_outcome(trace: Sequence[TraceFrame], user_id: Optional[int]) -> tuple:
    """Return ``(outcome, failure_cause)`` for a finished trial trace."""
    if not trace:
        raise HarnessError("empty trace")
    for f in trace:
        if f.phase is None or f.gt_boxes is None:
            raise HarnessError(f"trace frame {f.tick} is missing required channels")
    final = trace[-1]
    if final.activation_time_s is None:
        return FAILURE, "timeout"

    if final.phase == "Arrived":
        decisive = final
    else:
        seen = [f for f in trace if f.target_box is not None]
        if not seen:
            return FAILURE, "lost"
        decisive = seen[-1]
    match = best_match(decisive.target_box, decisive.gt_boxes)
    if match is not None and match != user_id:
        return FAILURE, "id_switch"
    if final.phase == "Arrived" and match is not None and match == user_id:
        return SUCCESS, None
    return FAILURE, "lost"
