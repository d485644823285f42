"""Covariance algebra and information measures for jointly Gaussian variables.

All information quantities are in nats. Covariances are plain numpy arrays;
a labeled block partition of a joint covariance is carried by ``JointGaussian``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DimensionMismatch",
    "SingularMatrix",
    "SingularConditioning",
    "JointGaussian",
    "symmetrize",
    "cholesky_with_jitter",
    "conditional_covariance",
    "log_det",
    "entropy",
    "mutual_information",
]

# Jitter scales relative to mean diagonal magnitude; first pass, then retry.
_JITTER_FIRST = 1e-9
_JITTER_RETRY = 1e-6
_MIN_PIVOT = 1e-12
_MI_CLAMP = -1e-10


class DimensionMismatch(ValueError):
    """Block labels or dimensions are inconsistent."""


class SingularMatrix(np.linalg.LinAlgError):
    """Cholesky failed even after jitter."""


class SingularConditioning(SingularMatrix):
    """The conditioning block is numerically singular."""


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def cholesky_with_jitter(P: np.ndarray, exc: type = SingularMatrix) -> np.ndarray:
    """Lower Cholesky factor of ``P`` after symmetrization and scaled jitter.

    Tries the clean factorization first (so well-conditioned inputs are exact),
    then adds 1e-9 * trace/dim * I, then retries once at 1e-6 scale. Raises
    ``exc`` if all attempts fail or the smallest pivot is below 1e-12 relative
    to scale.
    """
    P = symmetrize(np.asarray(P, dtype=float))
    d = P.shape[0]
    if d == 0:
        return np.zeros((0, 0))
    scale = max(float(np.trace(P)) / d, 0.0)
    for level in (0.0, _JITTER_FIRST, _JITTER_RETRY):
        try:
            L = np.linalg.cholesky(P + level * scale * np.eye(d))
        except np.linalg.LinAlgError:
            continue
        if np.min(np.diag(L)) ** 2 < _MIN_PIVOT * scale:
            continue
        return L
    raise exc(f"matrix of dim {d} not positive definite after jitter")


@dataclass(frozen=True)
class JointGaussian:
    """A joint Gaussian covariance partitioned into labeled blocks.

    ``labels`` gives the block order, ``dims`` the per-block dimension;
    ``cov`` is the full joint covariance in that order.
    """

    labels: tuple[str, ...]
    dims: tuple[int, ...]
    cov: np.ndarray
    _offsets: dict[str, tuple[int, int]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.labels) != len(set(self.labels)):
            raise DimensionMismatch("duplicate block labels")
        if len(self.labels) != len(self.dims):
            raise DimensionMismatch("labels/dims length mismatch")
        total = int(sum(self.dims))
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (total, total):
            raise DimensionMismatch(
                f"joint covariance is {cov.shape}, blocks sum to {total}"
            )
        offsets = {}
        pos = 0
        for lab, dim in zip(self.labels, self.dims):
            offsets[lab] = (pos, pos + dim)
            pos += dim
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_offsets", offsets)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    def indices(self, labels: Iterable[str]) -> np.ndarray:
        idx = []
        for lab in labels:
            if lab not in self._offsets:
                raise DimensionMismatch(f"unknown label {lab!r}")
            a, b = self._offsets[lab]
            idx.extend(range(a, b))
        return np.asarray(idx, dtype=int)

    def block(self, rows: Iterable[str], cols: Iterable[str]) -> np.ndarray:
        ri = self.indices(rows)
        ci = self.indices(cols)
        return self.cov[np.ix_(ri, ci)]


def _as_label_tuple(labels) -> tuple[str, ...]:
    if isinstance(labels, str):
        return (labels,)
    return tuple(labels)


def conditional_covariance(
    joint: JointGaussian,
    retain: Sequence[str] | str,
    condition: Sequence[str] | str = (),
) -> np.ndarray:
    """Schur-complement conditional covariance P(x) - P(x,z) P(z)^-1 P(z,x).

    ``retain`` and ``condition`` are disjoint label sets of ``joint``. An empty
    condition set returns the marginal block. Raises SingularConditioning when
    the conditioning block cannot be factorized.
    """
    retain = _as_label_tuple(retain)
    condition = _as_label_tuple(condition)
    if set(retain) & set(condition):
        raise DimensionMismatch("retain and condition sets overlap")
    Pxx = joint.block(retain, retain)
    if not condition:
        return symmetrize(Pxx)
    Pxz = joint.block(retain, condition)
    Pzz = joint.block(condition, condition)
    L = cholesky_with_jitter(Pzz, SingularConditioning)
    # P(x,z) P(z)^-1 P(z,x) via triangular solves
    W = np.linalg.solve(L, Pxz.T)
    return symmetrize(Pxx - W.T @ W)


def log_det(P: np.ndarray) -> float:
    """log |P| via Cholesky; raises SingularMatrix if not PD after jitter."""
    L = cholesky_with_jitter(np.asarray(P, dtype=float))
    return float(2.0 * np.sum(np.log(np.diag(L))))


def entropy(P: np.ndarray) -> float:
    """Differential entropy (nats) of a Gaussian with covariance ``P``."""
    P = np.asarray(P, dtype=float)
    d = P.shape[0]
    return 0.5 * d * (1.0 + math.log(2.0 * math.pi)) + 0.5 * log_det(P)


def mutual_information(
    joint: JointGaussian,
    x: Sequence[str] | str,
    z: Sequence[str] | str,
    given: Sequence[str] | str = (),
) -> float:
    """I(x; z | given) in nats, computed as H(z|given) - H(z|x,given).

    Nonnegative by construction; tiny negative roundoff is clamped to zero.
    """
    x = _as_label_tuple(x)
    z = _as_label_tuple(z)
    given = _as_label_tuple(given)
    for a, b in ((x, z), (x, given), (z, given)):
        if set(a) & set(b):
            raise DimensionMismatch("x, z, given must be pairwise disjoint")
    P_z_g = conditional_covariance(joint, z, given)
    P_z_xg = conditional_covariance(joint, z, x + given)
    v = 0.5 * (log_det(P_z_g) - log_det(P_z_xg))
    if _MI_CLAMP < v < 0.0:
        return 0.0
    return v
