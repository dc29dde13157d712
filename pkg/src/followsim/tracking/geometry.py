from __future__ import annotations

import math
from typing import Sequence, Tuple

from ..perception import CameraModel, ImageBox


def iou(a: ImageBox, b: ImageBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.w * a.h + b.w * b.h - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def center_distance(a: ImageBox, b: ImageBox) -> float:
    return math.hypot(a.cx - b.cx, a.cy - b.cy)


def direction(src: ImageBox, dst: ImageBox) -> Tuple[float, float]:
    """Unit vector between box centres; (0, 0) when they coincide."""
    dx, dy = dst.cx - src.cx, dst.cy - src.cy
    norm = math.hypot(dx, dy)
    if norm < 1e-6:
        return (0.0, 0.0)
    return (dx / norm, dy / norm)


def angle_between(u: Tuple[float, float], v: Tuple[float, float]) -> float:
    """Absolute angle in [0, pi]; zero if either vector is undefined."""
    if u == (0.0, 0.0) or v == (0.0, 0.0):
        return 0.0
    dot = max(-1.0, min(1.0, u[0] * v[0] + u[1] * v[1]))
    return math.acos(dot)


def ego_shift_px(omega: float, dt: float, cam: CameraModel) -> float:
    # Positive omega pans the camera left, so static scenery moves right.
    return omega * dt * (cam.width_px / cam.hfov)


def ego_compensate(boxes: Sequence[ImageBox], omega: float, dt: float, cam: CameraModel) -> list:
    shift = ego_shift_px(omega, dt, cam)
    return [ImageBox(b.cx + shift, b.cy, b.w, b.h) for b in boxes]
