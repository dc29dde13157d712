"""Constant-velocity Kalman filter over [cx, cy, w, h] and their velocities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..perception import ImageBox

DIM = 8
_F = np.eye(DIM)
_F[:4, 4:] = np.eye(4)
_H = np.zeros((4, DIM))
_H[:4, :4] = np.eye(4)
_Q = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 0.01, 0.01])
_R = np.eye(4)
# Initial uncertainty: observed components known to about the measurement
# noise, velocities essentially unknown.
_P0 = np.diag([10.0, 10.0, 10.0, 10.0, 1000.0, 1000.0, 1000.0, 1000.0])


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def box(self) -> ImageBox:
        cx, cy, w, h = (float(x) for x in self.mean[:4])
        return ImageBox(cx, cy, w, h)


def kalman_initiate(z: ImageBox) -> KalmanState:
    mean = np.zeros(DIM)
    mean[:4] = z.to_list()
    return KalmanState(mean, _P0.copy())


def kalman_predict(s: KalmanState, params=None) -> KalmanState:
    mean = _F @ s.mean
    # A shrinking box must not collapse through zero size.
    for k in (2, 3):
        if mean[k] <= 0.0:
            mean[k] = s.mean[k]
    cov = _F @ s.covariance @ _F.T + _Q
    return KalmanState(mean, 0.5 * (cov + cov.T))


def kalman_update(s: KalmanState, z: ImageBox, params=None) -> KalmanState:
    P = s.covariance
    innovation = np.asarray(z.to_list()) - _H @ s.mean
    S = _H @ P @ _H.T + _R
    K = np.linalg.solve(S, _H @ P).T
    mean = s.mean + K @ innovation
    # Joseph form keeps the posterior symmetric positive semi-definite.
    I_KH = np.eye(DIM) - K @ _H
    cov = I_KH @ P @ I_KH.T + K @ _R @ K.T
    return KalmanState(mean, 0.5 * (cov + cov.T))
