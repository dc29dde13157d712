"""Tracking-by-detection with interchangeable association policies.

``baseline``      greedy nearest-centre matching on high-confidence boxes,
                  no motion model.
``bytetrack``     Kalman prediction, Hungarian on 1-IoU for high-confidence
                  boxes, then a second pass over the low-confidence ones.
``ocsort``        bytetrack plus a direction-consistency term, a recovery
                  pass against the last real observation, and re-anchoring
                  of the filter after a gap.
``botsort_lite``  bytetrack with predictions shifted by the camera's own
                  rotation before association.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..perception import CameraModel, Detection, ImageBox
from .assignment import hungarian
from .geometry import angle_between, center_distance, direction, ego_shift_px, iou
from .kalman import KalmanState, kalman_initiate, kalman_predict, kalman_update

TRACKER_KINDS = ("baseline", "bytetrack", "ocsort", "botsort_lite")

_GATED = 1e6


@dataclass(frozen=True)
class TrackerParams:
    iou_gate_stage1: float = 0.3
    iou_gate_stage2: float = 0.5
    conf_high: float = 0.5
    conf_low: float = 0.1
    max_age: int = 30
    min_hits_to_confirm: int = 2
    ocm_weight: float = 0.2

    def __post_init__(self):
        for name in ("iou_gate_stage1", "iou_gate_stage2", "conf_high", "conf_low"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.max_age < 1:
            raise ValueError("max_age must be >= 1")


@dataclass(frozen=True)
class EgoMotionHint:
    omega_applied_last_tick: float = 0.0
    dt: float = 0.1


@dataclass
class Track:
    track_id: int
    kalman: KalmanState
    last_observation: ImageBox
    prev_observation: Optional[ImageBox] = None
    hits: int = 1
    time_since_update: int = 0
    confidence_last: float = 0.0
    last_detection: Optional[Detection] = None
    # Filter state right after the most recent real update (for re-anchoring).
    anchor: Optional[KalmanState] = None

    @property
    def box(self) -> ImageBox:
        return self.kalman.box


@dataclass
class _Frame:
    dets: Sequence[Detection]
    unmatched_tracks: List[int]
    unmatched_dets: List[int]
    matches: List[Tuple[int, int]] = field(default_factory=list)


class Tracker:
    def __init__(self, kind: str, params: Optional[TrackerParams] = None, cam: Optional[CameraModel] = None):
        if kind not in TRACKER_KINDS:
            raise ValueError(f"unknown tracker {kind!r}; valid: {', '.join(TRACKER_KINDS)}")
        self.kind = kind
        self.params = params or TrackerParams()
        self.cam = cam or CameraModel()
        self.tracks: List[Track] = []
        self.frame_count = 0
        self._next_id = 1

    # -- public -----------------------------------------------------------

    def update(
        self,
        detections: Sequence[Detection],
        ego: Optional[EgoMotionHint] = None,
        frame_index: Optional[int] = None,
    ) -> List[Track]:
        if frame_index is not None:
            assert frame_index == self.frame_count, (
                f"frames must arrive in order: expected {self.frame_count}, got {frame_index}"
            )
        self.frame_count += 1
        p = self.params

        self._predict(ego)
        if self.kind == "baseline":
            matched, spare = self._associate_baseline(detections)
        else:
            matched, spare = self._associate_kalman(detections)

        for ti, di in matched:
            self._apply_update(self.tracks[ti], detections[di])

        self.tracks = [t for t in self.tracks if t.time_since_update <= p.max_age]
        for di in spare:
            d = detections[di]
            if d.confidence >= p.conf_high:
                self._spawn(d)

        return [
            t
            for t in self.tracks
            if t.time_since_update == 0
            and (t.hits >= p.min_hits_to_confirm or self.frame_count <= p.min_hits_to_confirm)
        ]

    # -- internals --------------------------------------------------------

    def _spawn(self, d: Detection) -> None:
        k = kalman_initiate(d.box)
        self.tracks.append(
            Track(
                track_id=self._next_id,
                kalman=k,
                last_observation=d.box,
                confidence_last=d.confidence,
                last_detection=d,
                anchor=k,
            )
        )
        self._next_id += 1

    def _predict(self, ego: Optional[EgoMotionHint]) -> None:
        shift = 0.0
        if self.kind == "botsort_lite" and ego is not None:
            shift = ego_shift_px(ego.omega_applied_last_tick, ego.dt, self.cam)
        for t in self.tracks:
            t.time_since_update += 1
            if self.kind == "baseline":
                continue
            k = kalman_predict(t.kalman)
            if shift:
                mean = k.mean.copy()
                mean[0] += shift
                k = KalmanState(mean, k.covariance)
            t.kalman = k

    def _apply_update(self, t: Track, d: Detection) -> None:
        missed = t.time_since_update - 1
        if self.kind == "baseline":
            t.kalman = kalman_initiate(d.box)
        else:
            if self.kind == "ocsort" and missed > 1 and t.anchor is not None:
                t.kalman = self._reanchor(t, d.box, missed)
            t.kalman = kalman_update(t.kalman, d.box)
        t.prev_observation = t.last_observation
        t.last_observation = d.box
        t.hits += 1
        t.time_since_update = 0
        t.confidence_last = d.confidence
        t.last_detection = d
        t.anchor = t.kalman

    @staticmethod
    def _reanchor(t: Track, z: ImageBox, missed: int) -> KalmanState:
        """Replay the gap with virtual observations on the straight line
        from the last real observation to ``z``; returns the predicted state
        for the current frame, ready for the real update."""
        a, b = t.last_observation.to_list(), z.to_list()
        k = t.anchor
        for i in range(1, missed + 1):
            u = i / (missed + 1)
            virtual = ImageBox.from_list([a[j] + u * (b[j] - a[j]) for j in range(4)])
            k = kalman_update(kalman_predict(k), virtual)
        return kalman_predict(k)

    def _associate_baseline(self, dets: Sequence[Detection]):
        p = self.params
        pairs = []
        for ti, t in enumerate(self.tracks):
            for di, d in enumerate(dets):
                if d.confidence < p.conf_high:
                    continue
                dist = center_distance(t.last_observation, d.box)
                if dist <= t.last_observation.w:
                    pairs.append((dist, t.track_id, di, ti))
        pairs.sort()
        used_t, used_d, matched = set(), set(), []
        for _, _, di, ti in pairs:
            if ti in used_t or di in used_d:
                continue
            used_t.add(ti)
            used_d.add(di)
            matched.append((ti, di))
        spare = [di for di in range(len(dets)) if di not in used_d]
        return matched, spare

    def _iou_stage(self, track_idx, det_idx, dets, gate, use_last_obs=False, ocm=False):
        if not track_idx or not det_idx:
            return [], list(track_idx), list(det_idx)
        cost, ious = [], []
        for ti in track_idx:
            t = self.tracks[ti]
            ref = t.last_observation if use_last_obs else t.box
            motion = None
            if ocm and t.prev_observation is not None:
                motion = direction(t.prev_observation, t.last_observation)
            row_c, row_i = [], []
            for di in det_idx:
                box = dets[di].box
                v = iou(ref, box)
                c = 1.0 - v
                if motion is not None:
                    c += self.params.ocm_weight * angle_between(motion, direction(t.last_observation, box)) / math.pi
                row_i.append(v)
                row_c.append(c if v >= gate else _GATED)
            cost.append(row_c)
            ious.append(row_i)
        matched = []
        for r, c in hungarian(cost):
            if ious[r][c] >= gate:
                matched.append((track_idx[r], det_idx[c]))
        mt = {m[0] for m in matched}
        md = {m[1] for m in matched}
        return matched, [t for t in track_idx if t not in mt], [d for d in det_idx if d not in md]

    def _associate_kalman(self, dets: Sequence[Detection]):
        p = self.params
        high = [i for i, d in enumerate(dets) if d.confidence >= p.conf_high]
        low = [i for i, d in enumerate(dets) if p.conf_low <= d.confidence < p.conf_high]
        all_tracks = list(range(len(self.tracks)))
        ocsort = self.kind == "ocsort"

        m1, rest_t, rest_high = self._iou_stage(all_tracks, high, dets, p.iou_gate_stage1, ocm=ocsort)
        m2, rest_t, rest_low = self._iou_stage(rest_t, low, dets, p.iou_gate_stage2)
        matched = m1 + m2
        if ocsort:
            leftovers = sorted(rest_high + rest_low)
            m3, rest_t, left = self._iou_stage(rest_t, leftovers, dets, p.iou_gate_stage2, use_last_obs=True)
            matched += m3
            rest_high = [d for d in rest_high if d in left]
        return matched, rest_high


def tracker_update(tracker: Tracker, detections: Sequence[Detection], ego: Optional[EgoMotionHint] = None) -> List[Track]:
    return tracker.update(detections, ego)
