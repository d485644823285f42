"""Target motion, sensor kinematics, and the radar-like measurement model.

Targets live on a 2D map with state [x, y, vx, vy]; sensors fly at fixed
altitudes with a heading-limited field of view and take (range, azimuth)
measurements whose noise shrinks with SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "DegenerateGeometry",
    "TargetState",
    "CvModel",
    "SensorPose",
    "SensorCaps",
    "RadarNoiseParams",
    "DubinsTruth",
    "MapBounds",
    "wrap_angle",
    "cv_transition",
    "propagate_truth_cv",
    "propagate_truth_dubins",
    "measure",
    "measurement_jacobian",
    "noise_covariance",
    "scan_off_boresight",
    "in_sensing_region",
    "candidate_locations",
    "resolve_heading",
]


class DegenerateGeometry(ValueError):
    """Target horizontally coincident with the sensor; azimuth partials blow up."""


def wrap_angle(a: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class TargetState:
    x: float
    y: float
    vx: float
    vy: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.x, self.y, self.vx, self.vy], dtype=float)

    @staticmethod
    def from_vector(v: np.ndarray) -> "TargetState":
        return TargetState(float(v[0]), float(v[1]), float(v[2]), float(v[3]))


@dataclass(frozen=True)
class CvModel:
    """Continuous white noise acceleration model: timestep dt, intensity q."""

    dt: float = 1.0
    q: float = 0.1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.q < 0:
            raise ValueError("q must be nonnegative")


@dataclass(frozen=True)
class SensorPose:
    x: float
    y: float
    z: float
    theta: float

    def __post_init__(self):
        if self.z <= 0:
            raise ValueError("sensor altitude must be positive")
        object.__setattr__(self, "theta", wrap_angle(self.theta))


@dataclass(frozen=True)
class SensorCaps:
    """Platform mobility and sensing-region limits."""

    move_step_distances: tuple[float, float] = (30.0, 60.0)
    max_turn: float = math.pi / 3
    fov_half_angle: float = math.pi / 4
    range_min: float = 0.0
    range_max: float = 400.0
    boresight_depression: float = math.pi / 6

    def __post_init__(self):
        d1, d2 = self.move_step_distances
        if d1 <= 0 or d2 <= 0:
            raise ValueError("move distances must be positive")
        if not (0.0 < self.max_turn <= math.pi):
            raise ValueError("max_turn must be in (0, pi]")
        if not (0.0 < self.fov_half_angle < math.pi / 2):
            raise ValueError("fov_half_angle must be in (0, pi/2)")
        if self.range_min >= self.range_max:
            raise ValueError("range_min must be below range_max")


@dataclass(frozen=True)
class RadarNoiseParams:
    """SNR-dependent noise constants for the range/azimuth sensor."""

    theta_bw: float = 0.05
    k_m: float = 1.6
    delta_r: float = 10.0
    snr_ref: float = 50.0
    r_ref: float = 500.0

    def __post_init__(self):
        for name in ("theta_bw", "k_m", "delta_r", "snr_ref", "r_ref"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DubinsTruth:
    """Constant-speed ground vehicle with a (possibly scheduled) turn rate."""

    x: float
    y: float
    heading: float
    speed: float
    turn_rate: float = 0.0

    def __post_init__(self):
        if self.speed <= 0:
            raise ValueError("speed must be positive")


@dataclass(frozen=True)
class MapBounds:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("degenerate map bounds")


def cv_transition(model: CvModel, steps: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix F and process covariance Q for ``steps`` model steps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    dt = model.dt * steps
    F = np.array(
        [
            [1.0, 0.0, dt, 0.0],
            [0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    t3 = dt**3 / 3.0
    t2 = dt**2 / 2.0
    Q = model.q * np.array(
        [
            [t3, 0.0, t2, 0.0],
            [0.0, t3, 0.0, t2],
            [t2, 0.0, dt, 0.0],
            [0.0, t2, 0.0, dt],
        ]
    )
    return F, Q


def propagate_truth_cv(
    state: TargetState,
    model: CvModel,
    rng: np.random.Generator,
    bounds: MapBounds,
) -> TargetState:
    """One truth step of the CV model with velocity reflection at the map edge."""
    F, Q = cv_transition(model, 1)
    v = F @ state.as_vector()
    if model.q > 0.0:
        v = v + rng.multivariate_normal(np.zeros(4), Q, method="cholesky")
    x, y, vx, vy = v
    if x < bounds.x_min:
        x, vx = 2.0 * bounds.x_min - x, -vx
    elif x > bounds.x_max:
        x, vx = 2.0 * bounds.x_max - x, -vx
    if y < bounds.y_min:
        y, vy = 2.0 * bounds.y_min - y, -vy
    elif y > bounds.y_max:
        y, vy = 2.0 * bounds.y_max - y, -vy
    return TargetState(float(x), float(y), float(vx), float(vy))


def propagate_truth_dubins(state: DubinsTruth) -> DubinsTruth:
    """Advance a Dubins vehicle one step: turn first, then move along heading."""
    heading = wrap_angle(state.heading + state.turn_rate)
    return replace(
        state,
        x=state.x + state.speed * math.cos(heading),
        y=state.y + state.speed * math.sin(heading),
        heading=heading,
    )


def measure(pose: SensorPose, target_xy: tuple[float, float]) -> tuple[float, float]:
    """Noise-free (slant range, azimuth) of a ground target from the sensor."""
    dx = target_xy[0] - pose.x
    dy = target_xy[1] - pose.y
    r = math.sqrt(dx * dx + dy * dy + pose.z * pose.z)
    return r, math.atan2(dy, dx)


def measurement_jacobian(pose: SensorPose, predicted: TargetState) -> np.ndarray:
    """2x4 Jacobian of (range, azimuth) w.r.t. [x, y, vx, vy] at the prediction."""
    dx = predicted.x - pose.x
    dy = predicted.y - pose.y
    rho2 = dx * dx + dy * dy
    if rho2 <= 1e-18:
        raise DegenerateGeometry("target directly below sensor")
    r = math.sqrt(rho2 + pose.z * pose.z)
    H = np.zeros((2, 4))
    H[0, 0] = dx / r
    H[0, 1] = dy / r
    H[1, 0] = -dy / rho2
    H[1, 1] = dx / rho2
    return H


def noise_covariance(
    params: RadarNoiseParams, r: float, scan_off_boresight: float = 0.0
) -> np.ndarray:
    """Measurement noise R = diag(sigma_R^2, sigma_phi^2) at slant range ``r``.

    SNR follows the monostatic radar power law snr_ref * (r_ref / r)^4; the
    azimuth deviation widens by 1/cos of the beam scan angle off boresight.
    """
    if r <= 0:
        raise ValueError("range must be positive")
    snr = params.snr_ref * (params.r_ref / r) ** 4
    root = math.sqrt(2.0 * snr)
    sigma_phi = (params.theta_bw / math.cos(scan_off_boresight)) / (params.k_m * root)
    sigma_r = params.delta_r / root
    return np.diag([sigma_r**2, sigma_phi**2])


def scan_off_boresight(
    pose: SensorPose, caps: SensorCaps, target_xy: tuple[float, float]
) -> float:
    """3D angle between the sensor boresight and the line of sight to the target.

    Boresight points along the heading, tilted down by the fixed depression.
    """
    dx = target_xy[0] - pose.x
    dy = target_xy[1] - pose.y
    r = math.sqrt(dx * dx + dy * dy + pose.z * pose.z)
    dep = caps.boresight_depression
    bore = (
        math.cos(pose.theta) * math.cos(dep),
        math.sin(pose.theta) * math.cos(dep),
        -math.sin(dep),
    )
    los = (dx / r, dy / r, -pose.z / r)
    dot = bore[0] * los[0] + bore[1] * los[1] + bore[2] * los[2]
    return math.acos(min(1.0, max(-1.0, dot)))


def in_sensing_region(
    pose: SensorPose, caps: SensorCaps, target_xy: tuple[float, float]
) -> bool:
    """Detectability test: slant range in band and bearing inside the FOV cone.

    Boundaries are closed: a target exactly on the cone edge is detectable.
    """
    dx = target_xy[0] - pose.x
    dy = target_xy[1] - pose.y
    r = math.sqrt(dx * dx + dy * dy + pose.z * pose.z)
    if not (caps.range_min <= r <= caps.range_max):
        return False
    bearing = math.atan2(dy, dx)
    return abs(wrap_angle(bearing - pose.theta)) <= caps.fov_half_angle


_DIRECTIONS = tuple(i * math.pi / 4.0 for i in range(8))


def _single_step_offsets(caps: SensorCaps) -> list[tuple[float, float]]:
    offsets = [(0.0, 0.0)]
    for d in caps.move_step_distances:
        for ang in _DIRECTIONS:
            offsets.append((d * math.cos(ang), d * math.sin(ang)))
    return offsets


def _dedup(points: list[tuple[float, float]], scale: float) -> list[tuple[float, float]]:
    # Snap to a fine grid relative to the move scale so that coincident points
    # produced by different move compositions collapse to one candidate.
    tol = scale * 1e-9
    seen = {}
    for p in points:
        key = (round(p[0] / tol), round(p[1] / tol))
        if key not in seen:
            seen[key] = p
    return sorted(seen.values())


def candidate_locations(
    pose_xy: tuple[float, float], caps: SensorCaps, horizon_step: int = 1
) -> list[tuple[float, float]]:
    """Sensing locations reachable in ``horizon_step`` composed moves.

    One step gives 17 points (stay, plus 8 directions at each of 2 distances);
    multi-step sets are the deduplicated k-fold composition of those moves.
    Output is sorted by (x, y) so downstream tie-breaking is deterministic.
    """
    if horizon_step < 1:
        raise ValueError("horizon_step must be >= 1")
    offsets = _single_step_offsets(caps)
    scale = max(caps.move_step_distances)
    points = [pose_xy]
    for _ in range(horizon_step):
        points = _dedup(
            [(p[0] + o[0], p[1] + o[1]) for p in points for o in offsets], scale
        )
    return points


def resolve_heading(
    prev_theta: float,
    caps: SensorCaps,
    sensing_xy: tuple[float, float],
    target_predicted_xy: tuple[float, float],
) -> float:
    """Heading toward the target, clamped by the per-step turn limit."""
    desired = math.atan2(
        target_predicted_xy[1] - sensing_xy[1], target_predicted_xy[0] - sensing_xy[0]
    )
    delta = wrap_angle(desired - prev_theta)
    delta = max(-caps.max_turn, min(caps.max_turn, delta))
    return wrap_angle(prev_theta + delta)
