"""Per-target extended Kalman filter bank for range/azimuth tracking."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gaussian_info import cholesky_with_jitter, symmetrize
from .models import (
    CvModel,
    SensorPose,
    TargetState,
    cv_transition,
    measure,
    measurement_jacobian,
    wrap_angle,
)

__all__ = [
    "SingularInnovation",
    "TargetBelief",
    "TrackBank",
    "ekf_predict",
    "ekf_update",
    "apply_linear_update",
    "predict_horizon",
]


class SingularInnovation(np.linalg.LinAlgError):
    """Innovation covariance not invertible even after jitter."""


@dataclass(frozen=True)
class TargetBelief:
    mean: TargetState
    cov: np.ndarray
    target_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cov", symmetrize(np.asarray(self.cov, dtype=float)))


@dataclass
class TrackBank:
    beliefs: list[TargetBelief]
    step: int = 0

    def __post_init__(self):
        ids = [b.target_id for b in self.beliefs]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate target ids in track bank")


def ekf_predict(belief: TargetBelief, model: CvModel) -> TargetBelief:
    """One prediction step: mean through F, covariance F P F' + Q."""
    F, Q = cv_transition(model, 1)
    mean = F @ belief.mean.as_vector()
    cov = symmetrize(F @ belief.cov @ F.T + Q)
    return replace(belief, mean=TargetState.from_vector(mean), cov=cov)


def ekf_update(
    belief: TargetBelief,
    pose: SensorPose,
    z: tuple[float, float],
    R: np.ndarray,
) -> TargetBelief:
    """Range/azimuth EKF update linearized at the predicted mean.

    The azimuth innovation is wrapped to (-pi, pi]; the posterior covariance
    uses the Joseph form so it stays PSD.
    """
    H = measurement_jacobian(pose, belief.mean)
    pred = measure(pose, (belief.mean.x, belief.mean.y))
    innov = np.array([z[0] - pred[0], wrap_angle(z[1] - pred[1])])
    return apply_linear_update(belief, H, innov, R)


def apply_linear_update(
    belief: TargetBelief, H: np.ndarray, innov: np.ndarray, R: np.ndarray
) -> TargetBelief:
    """Kalman measurement update for a given linearization H and innovation.

    Shared core of ``ekf_update``; also usable directly with a genuinely
    linear measurement model, where it is the exact Kalman filter.
    """
    P = belief.cov
    R = np.asarray(R, dtype=float)
    S = H @ P @ H.T + R
    L = cholesky_with_jitter(S, SingularInnovation)
    Sinv = np.linalg.inv(L.T) @ np.linalg.inv(L)
    W = P @ H.T @ Sinv
    mean = belief.mean.as_vector() + W @ np.asarray(innov, dtype=float)
    A = np.eye(P.shape[0]) - W @ H
    cov = symmetrize(A @ P @ A.T + W @ R @ W.T)
    return replace(belief, mean=TargetState.from_vector(mean), cov=cov)


def normalize_models(model, n_targets: int) -> tuple[CvModel, ...]:
    """Accept one shared CvModel or a per-target sequence (dt must agree)."""
    if isinstance(model, CvModel):
        return (model,) * n_targets
    models = tuple(model)
    if len(models) != n_targets:
        raise ValueError(f"expected {n_targets} models, got {len(models)}")
    if len({m.dt for m in models}) > 1:
        raise ValueError("per-target models must share dt")
    return models


def predict_horizon(
    bank: TrackBank, model, K: int
) -> list[list[tuple[np.ndarray, np.ndarray]]]:
    """Open-loop K-step predicted (mean, covariance) per target.

    ``model`` is one CvModel or a per-target sequence (targets may carry
    different process-noise levels). Returns ``out[j][k-1] = (mean_k, P_k)``
    for target index j and step k, propagated recursively (O(K) per target)
    with no measurement updates.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    models = normalize_models(model, len(bank.beliefs))
    out = []
    for belief, m in zip(bank.beliefs, models):
        F, Q = cv_transition(m, 1)
        mean = belief.mean.as_vector()
        cov = belief.cov
        steps = []
        for _ in range(K):
            mean = F @ mean
            cov = symmetrize(F @ cov @ F.T + Q)
            steps.append((mean.copy(), cov.copy()))
        out.append(steps)
    return out
