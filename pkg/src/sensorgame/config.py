"""Strict TOML scenario configuration.

Unknown keys are errors; every complaint names the offending field by its
dotted path. The schema is versioned via a top-level ``schema_version``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .models import CvModel, MapBounds, RadarNoiseParams, SensorCaps, SensorPose

__all__ = [
    "ConfigError",
    "TargetConfig",
    "SensorConfig",
    "PlanningConfig",
    "RunConfig",
    "ScenarioConfig",
    "load_config",
    "parse_config",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or malformed scenario configuration."""


@dataclass(frozen=True)
class TargetConfig:
    kind: str  # "cv" | "dubins"
    init: tuple[float, float, float, float]  # x, y, vx, vy (truth)
    init_cov: tuple[float, float, float, float]  # diagonal of prior belief
    # cv-only truth process noise (None: use the tracker model's q)
    q: float | None = None
    # per-target tracker/planner process noise (None: use model.q); lets
    # maneuvering targets carry a maneuver-robust filter tuning
    tracker_q: float | None = None
    # dubins-only truth parameters
    speed: float = 5.0
    turn_amplitude: float = 0.0
    turn_period: float = 20.0


@dataclass(frozen=True)
class SensorConfig:
    pose: SensorPose
    caps: SensorCaps
    noise: RadarNoiseParams


@dataclass(frozen=True)
class PlanningConfig:
    mode: str  # "myopic" | "ol" | "olf"
    k: int
    commit: int = 2
    alpha: float = 0.3
    beta: float = 0.85
    max_inner_iters: int = 100
    max_outer_iters: int = 50


@dataclass(frozen=True)
class RunConfig:
    num_steps: int
    num_mc_runs: int = 1
    seed: int = 0
    randomize: bool = False
    speed_band: tuple[float, float] = (2.0, 8.0)


@dataclass(frozen=True)
class ScenarioConfig:
    bounds: MapBounds
    model: CvModel
    targets: tuple[TargetConfig, ...]
    sensors: tuple[SensorConfig, ...]
    planning: PlanningConfig
    run: RunConfig

    def __post_init__(self):
        if not self.targets:
            raise ConfigError("targets: at least one target is required")
        if not self.sensors:
            raise ConfigError("sensors: at least one sensor is required")
        if self.planning.k < 1:
            raise ConfigError("planning.k: must be >= 1")
        zs = [s.pose.z for s in self.sensors]
        if len(set(zs)) != len(zs):
            raise ConfigError("sensors: altitudes (z) must be pairwise distinct")


def _require(table: dict, key: str, path: str):
    if key not in table:
        raise ConfigError(f"{path}.{key}: missing required key")
    return table[key]


def _check_unknown(table: dict, allowed: set[str], path: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}: unknown key")


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {type(v).__name__}")
    return float(v)


def _vector(v, n: int, path: str) -> tuple[float, ...]:
    if not isinstance(v, list) or len(v) != n:
        raise ConfigError(f"{path}: expected a list of {n} numbers")
    return tuple(_number(x, f"{path}[{i}]") for i, x in enumerate(v))


def _parse_target(t: dict, path: str) -> TargetConfig:
    _check_unknown(
        t,
        {"type", "init", "init_cov", "q", "tracker_q", "speed",
         "turn_amplitude", "turn_period"},
        path,
    )
    kind = _require(t, "type", path)
    if kind not in ("cv", "dubins"):
        raise ConfigError(f"{path}.type: must be 'cv' or 'dubins', got {kind!r}")
    init = _vector(_require(t, "init", path), 4, f"{path}.init")
    init_cov = _vector(_require(t, "init_cov", path), 4, f"{path}.init_cov")
    if any(c <= 0 for c in init_cov):
        raise ConfigError(f"{path}.init_cov: entries must be positive")
    kw = {}
    if "q" in t:
        if kind != "cv":
            raise ConfigError(f"{path}.q: cv-only key on a dubins target")
        kw["q"] = _number(t["q"], f"{path}.q")
        if kw["q"] < 0:
            raise ConfigError(f"{path}.q: must be >= 0")
    if "tracker_q" in t:
        kw["tracker_q"] = _number(t["tracker_q"], f"{path}.tracker_q")
        if kw["tracker_q"] <= 0:
            raise ConfigError(f"{path}.tracker_q: must be positive")
    if kind == "dubins":
        kw["speed"] = _number(t.get("speed", 5.0), f"{path}.speed")
        kw["turn_amplitude"] = _number(
            t.get("turn_amplitude", 0.0), f"{path}.turn_amplitude"
        )
        kw["turn_period"] = _number(t.get("turn_period", 20.0), f"{path}.turn_period")
        if kw["speed"] <= 0:
            raise ConfigError(f"{path}.speed: must be positive")
        if kw["turn_period"] <= 0:
            raise ConfigError(f"{path}.turn_period: must be positive")
    elif {"speed", "turn_amplitude", "turn_period"} & set(t):
        raise ConfigError(f"{path}: dubins-only keys on a cv target")
    return TargetConfig(kind=kind, init=init, init_cov=init_cov, **kw)


def _parse_caps(c: dict, path: str) -> SensorCaps:
    allowed = {
        "move_step_distances",
        "max_turn",
        "fov_half_angle",
        "range_min",
        "range_max",
        "boresight_depression",
    }
    _check_unknown(c, allowed, path)
    kw = {}
    if "move_step_distances" in c:
        v = c["move_step_distances"]
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{path}.move_step_distances: expected a nonempty list")
        kw["move_step_distances"] = tuple(
            _number(x, f"{path}.move_step_distances[{i}]") for i, x in enumerate(v)
        )
    for k in allowed - {"move_step_distances"}:
        if k in c:
            kw[k] = _number(c[k], f"{path}.{k}")
    try:
        return SensorCaps(**kw)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_noise(n: dict, path: str) -> RadarNoiseParams:
    allowed = {"theta_bw", "k_m", "delta_r", "snr_ref", "r_ref"}
    _check_unknown(n, allowed, path)
    kw = {k: _number(n[k], f"{path}.{k}") for k in allowed if k in n}
    try:
        return RadarNoiseParams(**kw)
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from e


def _parse_sensor(s: dict, path: str) -> SensorConfig:
    _check_unknown(s, {"position", "z", "heading", "caps", "noise"}, path)
    pos = _vector(_require(s, "position", path), 2, f"{path}.position")
    z = _number(_require(s, "z", path), f"{path}.z")
    heading = _number(s.get("heading", 0.0), f"{path}.heading")
    if z <= 0:
        raise ConfigError(f"{path}.z: altitude must be positive")
    caps = _parse_caps(s.get("caps", {}), f"{path}.caps")
    noise = _parse_noise(s.get("noise", {}), f"{path}.noise")
    pose = SensorPose(x=pos[0], y=pos[1], z=z, theta=heading)
    return SensorConfig(pose=pose, caps=caps, noise=noise)


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a parsed TOML document into a ScenarioConfig."""
    _check_unknown(
        data,
        {"schema_version", "map", "model", "targets", "sensors", "planning", "run"},
        "config",
    )
    version = _require(data, "schema_version", "config")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"config.schema_version: expected {SCHEMA_VERSION}, got {version!r}"
        )

    m = _require(data, "map", "config")
    _check_unknown(m, {"x_min", "x_max", "y_min", "y_max"}, "map")
    try:
        bounds = MapBounds(
            x_min=_number(_require(m, "x_min", "map"), "map.x_min"),
            x_max=_number(_require(m, "x_max", "map"), "map.x_max"),
            y_min=_number(_require(m, "y_min", "map"), "map.y_min"),
            y_max=_number(_require(m, "y_max", "map"), "map.y_max"),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(f"map: {e}") from e

    mod = data.get("model", {})
    _check_unknown(mod, {"dt", "q"}, "model")
    model = CvModel(
        dt=_number(mod.get("dt", 1.0), "model.dt"),
        q=_number(mod.get("q", 0.1), "model.q"),
    )

    raw_targets = _require(data, "targets", "config")
    if not isinstance(raw_targets, list) or not raw_targets:
        raise ConfigError("targets: expected a nonempty array of tables")
    targets = tuple(
        _parse_target(t, f"targets[{i}]") for i, t in enumerate(raw_targets)
    )

    raw_sensors = _require(data, "sensors", "config")
    if not isinstance(raw_sensors, list) or not raw_sensors:
        raise ConfigError("sensors: expected a nonempty array of tables")
    sensors = tuple(
        _parse_sensor(s, f"sensors[{i}]") for i, s in enumerate(raw_sensors)
    )

    p = _require(data, "planning", "config")
    _check_unknown(
        p,
        {"mode", "k", "commit", "alpha", "beta", "max_inner_iters", "max_outer_iters"},
        "planning",
    )
    mode = _require(p, "mode", "planning")
    if mode not in ("myopic", "ol", "olf"):
        raise ConfigError(f"planning.mode: must be myopic|ol|olf, got {mode!r}")
    k = _require(p, "k", "planning")
    if not isinstance(k, int) or isinstance(k, bool):
        raise ConfigError("planning.k: expected an integer")
    planning = PlanningConfig(
        mode=mode,
        k=k,
        commit=int(p.get("commit", 2)),
        alpha=_number(p.get("alpha", 0.3), "planning.alpha"),
        beta=_number(p.get("beta", 0.85), "planning.beta"),
        max_inner_iters=int(p.get("max_inner_iters", 100)),
        max_outer_iters=int(p.get("max_outer_iters", 50)),
    )
    if planning.commit < 1:
        raise ConfigError("planning.commit: must be >= 1")

    r = _require(data, "run", "config")
    _check_unknown(
        r, {"num_steps", "num_mc_runs", "seed", "randomize", "speed_band"}, "run"
    )
    num_steps = _require(r, "num_steps", "run")
    if not isinstance(num_steps, int) or num_steps < 1:
        raise ConfigError("run.num_steps: expected a positive integer")
    band = r.get("speed_band", [2.0, 8.0])
    run = RunConfig(
        num_steps=num_steps,
        num_mc_runs=int(r.get("num_mc_runs", 1)),
        seed=int(r.get("seed", 0)),
        randomize=bool(r.get("randomize", False)),
        speed_band=_vector(list(band), 2, "run.speed_band"),
    )
    if run.num_mc_runs < 1:
        raise ConfigError("run.num_mc_runs: must be >= 1")
    if not (0.0 < run.speed_band[0] <= run.speed_band[1]):
        raise ConfigError("run.speed_band: expected 0 < low <= high")

    try:
        return ScenarioConfig(
            bounds=bounds,
            model=model,
            targets=targets,
            sensors=sensors,
            planning=planning,
            run=run,
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    return parse_config(data)
