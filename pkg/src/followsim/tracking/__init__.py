from .assignment import assignment_cost, hungarian
from .geometry import ego_compensate, iou
from .kalman import KalmanState, kalman_initiate, kalman_predict, kalman_update
from .trackers import (
    TRACKER_KINDS,
    EgoMotionHint,
    Track,
    Tracker,
    TrackerParams,
    tracker_update,
)

__all__ = [
    "TRACKER_KINDS",
    "EgoMotionHint",
    "KalmanState",
    "Track",
    "Tracker",
    "TrackerParams",
    "assignment_cost",
    "ego_compensate",
    "hungarian",
    "iou",
    "kalman_initiate",
    "kalman_predict",
    "kalman_update",
    "tracker_update",
]
