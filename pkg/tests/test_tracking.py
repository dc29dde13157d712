import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from followsim.perception import ZERO_NOISE, CameraModel, Detection, ImageBox, detect, project_agent, render_frame
from followsim.scenario import crossing_fixture, default_scenario
from followsim.tracking import (
    TRACKER_KINDS,
    EgoMotionHint,
    KalmanState,
    Tracker,
    TrackerParams,
    assignment_cost,
    ego_compensate,
    hungarian,
    iou,
    kalman_initiate,
    kalman_predict,
    kalman_update,
    tracker_update,
)
from followsim.world import STOP, MotionCommand, RobotPose, step_world

from conftest import make_agent
from oracles import brute_force_cost

boxes = st.builds(
    ImageBox,
    st.floats(-50, 200),
    st.floats(-50, 200),
    st.floats(0.5, 80),
    st.floats(0.5, 80),
)


# -- IoU ------------------------------------------------------------------------


def test_iou_examples():
    a = ImageBox.from_xyxy(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, ImageBox.from_xyxy(20, 20, 30, 30)) == 0.0
    assert iou(a, ImageBox.from_xyxy(5, 0, 15, 10)) == pytest.approx(50 / 150, abs=1e-15)


@given(boxes, boxes)
def test_iou_symmetric_and_bounded(a, b):
    v = iou(a, b)
    assert v == iou(b, a)
    assert 0.0 <= v <= 1.0


@given(boxes)
def test_iou_self_is_one(a):
    assert iou(a, a) == pytest.approx(1.0, abs=1e-12)


@given(boxes, boxes, st.floats(-100, 100), st.floats(-100, 100))
def test_iou_translation_invariant(a, b, dx, dy):
    shift = lambda x: ImageBox(x.cx + dx, x.cy + dy, x.w, x.h)
    assert iou(shift(a), shift(b)) == pytest.approx(iou(a, b), abs=1e-9)


# -- Hungarian ------------------------------------------------------------------


def test_diagonal_matrix_gives_diagonal():
    c = [[0, 5, 5], [5, 0, 5], [5, 5, 0]]
    assert hungarian(c) == [(0, 0), (1, 1), (2, 2)]


def test_two_by_two_example():
    pairs = hungarian([[1, 2], [2, 4]])
    assert pairs == [(0, 1), (1, 0)]
    assert assignment_cost([[1, 2], [2, 4]], pairs) == 4


def test_empty_and_non_finite():
    assert hungarian([]) == []
    assert hungarian([[]]) == []
    with pytest.raises(ValueError):
        hungarian([[1, math.inf], [0, 1]])


@settings(max_examples=200)
@given(
    st.integers(1, 5).flatmap(
        lambda n: st.integers(1, 5).flatmap(
            lambda m: st.lists(st.lists(st.floats(0, 10), min_size=m, max_size=m), min_size=n, max_size=n)
        )
    )
)
def test_rectangular_matches_brute_force_cost(cost):
    pairs = hungarian(cost)
    n, m = len(cost), len(cost[0])
    assert len(pairs) == min(n, m)
    assert len({r for r, _ in pairs}) == len({c for _, c in pairs}) == len(pairs)
    assert assignment_cost(cost, pairs) == pytest.approx(brute_force_cost(cost), abs=1e-9)


def test_ties_break_lexicographically():
    # Every permutation costs the same, so the identity is the smallest.
    assert hungarian([[1, 1, 1], [1, 1, 1], [1, 1, 1]]) == [(0, 0), (1, 1), (2, 2)]
    # Both permutations cost 3; the identity is lexicographically smaller.
    assert hungarian([[2, 2], [1, 1]]) == [(0, 0), (1, 1)]
    assert hungarian([[1, 2], [1, 2]]) == [(0, 0), (1, 1)]


def _lex_brute(cost):
    n = len(cost)
    best = min(sum(cost[i][p[i]] for i in range(n)) for p in itertools.permutations(range(n)))
    return next(list(enumerate(p)) for p in itertools.permutations(range(n)) if sum(cost[i][p[i]] for i in range(n)) == best)


@settings(max_examples=150)
@given(st.integers(2, 5).flatmap(lambda n: st.lists(st.lists(st.integers(0, 3), min_size=n, max_size=n), min_size=n, max_size=n)))
def test_integer_ties_match_lexicographic_oracle(cost):
    assert hungarian(cost) == _lex_brute(cost)


# -- Kalman ---------------------------------------------------------------------


def test_predict_zero_velocity_fixed_point():
    s = kalman_initiate(ImageBox(10, 20, 30, 40))
    assert np.array_equal(kalman_predict(s).mean, s.mean)


def test_predict_one_linear_step():
    s = kalman_initiate(ImageBox(10, 20, 30, 40))
    mean = s.mean.copy()
    mean[4] = 2.0
    assert kalman_predict(KalmanState(mean, s.covariance)).mean[0] == 12.0


def test_update_zero_innovation():
    s = kalman_predict(kalman_initiate(ImageBox(10, 20, 30, 40)))
    assert np.allclose(kalman_update(s, ImageBox(10, 20, 30, 40)).mean, s.mean)


def test_scalar_gain_half():
    # With P = I and R = I the gain on each observed component is 1/(1+1).
    s = KalmanState(np.array([0.0, 0, 10, 10, 0, 0, 0, 0]), np.eye(8))
    post = kalman_update(s, ImageBox(2.0, 4.0, 12.0, 14.0))
    assert post.mean[:4] == pytest.approx([1.0, 2.0, 11.0, 12.0], abs=1e-12)
    assert np.diag(post.covariance)[:4] == pytest.approx([0.5] * 4, abs=1e-12)


def test_repeated_measurement_converges():
    # A constant-velocity filter overshoots a step once, then settles
    # monotonically onto the measurement.
    z = ImageBox(50, 60, 20, 40)
    s = kalman_initiate(ImageBox(40, 60, 20, 40))
    gaps = []
    for _ in range(60):
        s = kalman_update(kalman_predict(s), z)
        gaps.append(abs(s.mean[0] - z.cx))
    assert gaps[0] < 10.0
    tail = gaps[5:]
    assert all(b <= a for a, b in zip(tail, tail[1:]))
    assert gaps[-1] < 1e-2


@settings(max_examples=60)
@given(st.lists(st.one_of(st.none(), boxes), min_size=1, max_size=40))
def test_covariance_stays_psd(measurements):
    s = kalman_initiate(ImageBox(80, 60, 20, 50))
    for z in measurements:
        s = kalman_predict(s)
        if z is not None:
            s = kalman_update(s, z)
        assert np.allclose(s.covariance, s.covariance.T)
        assert np.linalg.eigvalsh(s.covariance).min() >= -1e-9


# -- trackers ---------------------------------------------------------------------


def _det(box, conf=0.9, truth=None):
    return Detection(box, conf, {}, truth)


@pytest.mark.parametrize("kind", TRACKER_KINDS)
def test_genesis(kind):
    tracks = Tracker(kind).update([_det(ImageBox(80, 60, 20, 50))])
    assert [t.track_id for t in tracks] == [1]


@pytest.mark.parametrize("kind", TRACKER_KINDS)
def test_stationary_persistence(kind):
    tr = Tracker(kind)
    for _ in range(5):
        (t,) = tracker_update(tr, [_det(ImageBox(80, 60, 20, 50))], EgoMotionHint())
        assert t.track_id == 1
        assert t.time_since_update == 0


def test_unknown_kind_rejected():
    with pytest.raises(ValueError, match="valid"):
        Tracker("warp9")


def test_low_confidence_never_spawns():
    tr = Tracker("bytetrack")
    assert tr.update([_det(ImageBox(80, 60, 20, 50), conf=0.3)]) == []
    assert tr.tracks == []


def test_bytetrack_recovers_low_confidence_detection():
    tr = Tracker("bytetrack")
    b = ImageBox(80, 60, 20, 50)
    tr.update([_det(b)])
    tr.update([_det(b)])
    (t,) = tr.update([_det(b, conf=0.3)])
    assert t.track_id == 1
    # The baseline ignores the same low-confidence detection.
    base = Tracker("baseline")
    base.update([_det(b)])
    base.update([_det(b)])
    assert base.update([_det(b, conf=0.3)]) == []


def test_tracks_expire_after_max_age():
    tr = Tracker("ocsort", TrackerParams(max_age=3))
    tr.update([_det(ImageBox(80, 60, 20, 50))])
    for _ in range(4):
        tr.update([])
    assert tr.tracks == []


def test_frame_order_enforced():
    tr = Tracker("ocsort")
    tr.update([], frame_index=0)
    with pytest.raises(AssertionError):
        tr.update([], frame_index=5)


def _run_fixture_stationary(kind, frames=60):
    sc = crossing_fixture()
    w, tr, rng = sc.initial_world(), Tracker(kind), np.random.default_rng(0)
    history = []
    for _ in range(frames):
        dets = detect(render_frame(w, sc.camera), ZERO_NOISE, rng)
        tracks = tr.update(dets)
        history.append({t.last_detection.truth_agent_id: t.track_id for t in tracks})
        w = step_world(w, STOP, sc.dt)
    return history


def test_crossing_fixture_ocsort_keeps_user_identity():
    history = _run_fixture_stationary("ocsort")
    seen = {h[1] for h in history if 1 in h}
    assert seen == {1}
    assert any(1 not in h for h in history)  # the user really was hidden


def test_crossing_fixture_baseline_loses_user_identity():
    history = _run_fixture_stationary("baseline")
    seen = {h[1] for h in history if 1 in h}
    assert len(seen) > 1


def test_ego_compensation_examples(cam):
    b = ImageBox(50, 60, 20, 40)
    assert ego_compensate([b], 0.0, 0.1, cam) == [b]
    (s,) = ego_compensate([b], 0.3, 0.1, cam)
    assert s.cx - b.cx == pytest.approx(0.03 * 160 / (math.pi / 3), abs=1e-12)
    assert s.cx - b.cx == pytest.approx(4.58, abs=0.005)


@pytest.mark.parametrize("omega", [0.3, -0.3, 0.6])
def test_ego_compensation_matches_next_projection(cam, omega):
    agent = make_agent(x=2.5, y=0.1)
    before = project_agent(RobotPose(), agent, cam)
    after = project_agent(RobotPose(heading=omega * 0.1), agent, cam)
    (pred,) = ego_compensate([before], omega, 0.1, cam)
    assert abs(pred.cx - after.cx) < 1.0
    # Without compensation the error is several pixels.
    assert abs(before.cx - after.cx) > 3.0


@pytest.mark.parametrize("kind", TRACKER_KINDS)
def test_zero_noise_persistence_without_occlusion(kind):
    sc = default_scenario(2.5, with_passerby=False, noise=ZERO_NOISE)
    first = _run_default_world(sc, kind)
    assert all(h == {1: 1} for h in first)


def _run_default_world(sc, kind, frames=50):
    w, tr, rng = sc.initial_world(), Tracker(kind), np.random.default_rng(0)
    out = []
    for _ in range(frames):
        tracks = tr.update(detect(render_frame(w, sc.camera), sc.noise, rng))
        out.append({t.last_detection.truth_agent_id: t.track_id for t in tracks})
        w = step_world(w, STOP, sc.dt)
    return out


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(TRACKER_KINDS), st.integers(0, 2**31), st.lists(st.floats(-0.6, 0.6), min_size=30, max_size=30))
def test_id_uniqueness_and_monotone_allocation(kind, seed, omegas):
    sc = default_scenario(2.5)
    w, tr, rng = sc.initial_world(), Tracker(kind), np.random.default_rng(seed)
    allocated = set()
    last_omega = 0.0
    for om in omegas:
        tracks = tr.update(detect(render_frame(w, sc.camera), sc.noise, rng), EgoMotionHint(last_omega, sc.dt))
        ids = [t.track_id for t in tracks]
        assert len(ids) == len(set(ids))
        new = {t.track_id for t in tr.tracks} - allocated
        if new and allocated:
            assert min(new) > max(allocated)
        allocated |= new
        w = step_world(w, MotionCommand(0.0, om), sc.dt)
        last_omega = om
