"""Scenario simulation: truth propagation, receding-horizon execution of the
planners, EKF tracking, Monte Carlo batches, and result emission.

Three planning modes share one execution loop:

- ``myopic``: two-step shared-target planning, replanned every two steps;
- ``ol`` (open loop): a K-step plan executed to completion before replanning;
- ``olf`` (open-loop feedback): a K-step plan of which only the first
  ``commit`` steps (default 2) are executed before replanning.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import ScenarioConfig, SensorConfig, TargetConfig
from .game import PlanAction, PlayerId, SensorDef
from .models import (
    DegenerateGeometry,
    DubinsTruth,
    SensorPose,
    TargetState,
    in_sensing_region,
    measure,
    noise_covariance,
    scan_off_boresight,
    propagate_truth_cv,
    propagate_truth_dubins,
)
from .planner import LearnerParams, plan_myopic, plan_nonmyopic
from .tracker import SingularInnovation, TargetBelief, TrackBank, ekf_predict, ekf_update

__all__ = [
    "RunMetrics",
    "RunLog",
    "AggregateMetrics",
    "run_scenario",
    "run_monte_carlo",
    "emit_results",
    "render_csv",
    "render_json",
]


@dataclass
class RunMetrics:
    """Per-step tracking quality and planner effort for one run."""

    errors: np.ndarray  # (num_steps, n_targets) position error norms
    potentials: np.ndarray  # (num_steps,) planned potential covering each step
    planner_calls: int
    outer_iters: int
    utility_evals: int
    wall_time: float


@dataclass
class RunLog:
    """Time-indexed trace of one run (step index is 1-based in comments)."""

    truth: list[list[tuple[float, float, float, float]]]  # [step][target]
    beliefs: list[list[tuple[np.ndarray, np.ndarray]]]  # [step][target] (mean, cov)
    executed: list[list[tuple[float, float, float, int]]]  # [step][sensor] x,y,th,tgt
    measured: list[list[bool]]  # [step][sensor]
    warnings: list[str] = field(default_factory=list)


@dataclass
class AggregateMetrics:
    """Monte Carlo aggregate for one planning mode."""

    mode: str
    errors: np.ndarray  # (n_runs, num_steps, n_targets)
    potentials: np.ndarray  # (n_runs, num_steps)

    @property
    def num_steps(self) -> int:
        return self.errors.shape[1]

    @property
    def n_targets(self) -> int:
        return self.errors.shape[2]

    def rmse_mean(self) -> np.ndarray:
        """(num_steps, n_targets) root-mean-square position error over runs."""
        return np.sqrt(np.mean(self.errors**2, axis=0))

    def rmse_std(self) -> np.ndarray:
        """(num_steps, n_targets) std of the per-run error norms."""
        return np.std(self.errors, axis=0)

    def potential_mean(self) -> np.ndarray:
        return np.mean(self.potentials, axis=0)


# ---------------------------------------------------------------------------
# initialization


def _init_truth(cfg: ScenarioConfig, rng: np.random.Generator):
    """Initial truth objects: TargetState for cv, DubinsTruth for dubins."""
    out = []
    b = cfg.bounds
    for t in cfg.targets:
        if cfg.run.randomize:
            x = float(rng.uniform(b.x_min, b.x_max))
            y = float(rng.uniform(b.y_min, b.y_max))
            speed = float(rng.uniform(*cfg.run.speed_band))
            heading = float(rng.uniform(-math.pi, math.pi))
        else:
            x, y = t.init[0], t.init[1]
            heading = math.atan2(t.init[3], t.init[2]) if t.kind == "cv" else math.atan2(
                t.init[3], t.init[2]
            )
            speed = math.hypot(t.init[2], t.init[3]) if t.kind == "cv" else t.speed
        if t.kind == "cv":
            out.append(
                TargetState(x, y, speed * math.cos(heading), speed * math.sin(heading))
            )
        else:
            spd = t.speed if not cfg.run.randomize else speed
            out.append(DubinsTruth(x=x, y=y, heading=heading, speed=spd))
    return out


def _truth_vector(truth) -> tuple[float, float, float, float]:
    if isinstance(truth, TargetState):
        return (truth.x, truth.y, truth.vx, truth.vy)
    vx = truth.speed * math.cos(truth.heading)
    vy = truth.speed * math.sin(truth.heading)
    return (truth.x, truth.y, vx, vy)


def _init_beliefs(
    cfg: ScenarioConfig, truths, rng: np.random.Generator
) -> TrackBank:
    """Prior beliefs: truth state perturbed by the prior covariance."""
    beliefs = []
    for j, t in enumerate(cfg.targets):
        tv = np.array(_truth_vector(truths[j]))
        sd = np.sqrt(np.array(t.init_cov))
        mean = tv + sd * rng.standard_normal(4)
        beliefs.append(
            TargetBelief(
                mean=TargetState.from_vector(mean),
                cov=np.diag(np.array(t.init_cov)),
                target_id=j,
            )
        )
    return TrackBank(beliefs=tuple(beliefs), step=0)


def _init_sensors(cfg: ScenarioConfig, rng: np.random.Generator) -> list[SensorDef]:
    out = []
    b = cfg.bounds
    for s in cfg.sensors:
        pose = s.pose
        if cfg.run.randomize:
            pose = replace(
                pose,
                x=float(rng.uniform(b.x_min, b.x_max)),
                y=float(rng.uniform(b.y_min, b.y_max)),
                theta=float(rng.uniform(-math.pi, math.pi)),
            )
        out.append(SensorDef(pose=pose, caps=s.caps, noise=s.noise))
    return out


def _step_truth(cfg: ScenarioConfig, truths, step: int, rng: np.random.Generator):
    """Advance all truth targets one step. ``step`` is the 0-based index of
    the transition (used by the sinusoid turn-rate schedule)."""
    out = []
    for t, truth in zip(cfg.targets, truths):
        if isinstance(truth, TargetState):
            model = cfg.model if t.q is None else replace(cfg.model, q=t.q)
            out.append(propagate_truth_cv(truth, model, rng, cfg.bounds))
        else:
            rate = t.turn_amplitude * math.sin(2.0 * math.pi * step / t.turn_period)
            out.append(propagate_truth_dubins(replace(truth, turn_rate=rate)))
    return out


# ---------------------------------------------------------------------------
# one run


def run_scenario(cfg: ScenarioConfig, seed: int) -> tuple[RunMetrics, RunLog]:
    """Execute one fully seeded run: plan, move, measure, track, record."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    truths = _init_truth(cfg, rng)
    bank = _init_beliefs(cfg, truths, rng)
    sensors = _init_sensors(cfg, rng)
    n_targets = len(cfg.targets)
    n_sensors = len(sensors)
    p = cfg.planning

    filter_models = tuple(
        cfg.model if t.tracker_q is None else replace(cfg.model, q=t.tracker_q)
        for t in cfg.targets
    )
    errors = np.zeros((cfg.run.num_steps, n_targets))
    potentials = np.zeros(cfg.run.num_steps)
    log = RunLog(truth=[], beliefs=[], executed=[], measured=[])
    planner_calls = 0
    outer_iters = 0
    utility_evals = 0

    commit = p.k if p.mode == "ol" else (min(p.commit, 2) if p.mode == "myopic" else p.commit)
    horizon = 2 if p.mode == "myopic" else p.k
    commit = min(commit, horizon)
    plan = None
    plan_step = 0  # 0-based time at which the current plan was made
    current_potential = 0.0

    for t in range(cfg.run.num_steps):
        if plan is None or t - plan_step >= commit:
            params = LearnerParams(
                alpha=p.alpha,
                beta=p.beta,
                max_inner_iters=p.max_inner_iters,
                max_outer_iters=p.max_outer_iters,
                rng_seed=int(rng.integers(2**31 - 1)),
            )
            if p.mode == "myopic":
                res = plan_myopic(bank, sensors, filter_models, params)
            else:
                res = plan_nonmyopic(bank, sensors, filter_models, horizon, params)
            plan, plan_step = res.plan, t
            current_potential = res.potential_value
            planner_calls += 1
            outer_iters += res.outer_iters
            utility_evals += res.total_utility_evals
            if res.iteration_cap_hit:
                log.warnings.append(f"step {t + 1}: planner hit an iteration cap")

        k = t - plan_step + 1  # which step of the current plan to execute
        executed_row = []
        for i in range(n_sensors):
            act = plan.actions[PlayerId(i, k)]
            heading = plan.headings[PlayerId(i, k)]
            pose = replace(
                sensors[i].pose, x=act.location[0], y=act.location[1], theta=heading
            )
            sensors[i] = replace(sensors[i], pose=pose)
            executed_row.append((pose.x, pose.y, heading, act.target))

        truths = _step_truth(cfg, truths, t, rng)

        # time update, then measurement updates of assigned in-region targets
        beliefs = [ekf_predict(b, m) for b, m in zip(bank.beliefs, filter_models)]
        measured_row = []
        for i in range(n_sensors):
            j = executed_row[i][3]
            pose, caps, noise = sensors[i].pose, sensors[i].caps, sensors[i].noise
            txy = (_truth_vector(truths[j])[0], _truth_vector(truths[j])[1])
            got = in_sensing_region(pose, caps, txy)
            if got:
                try:
                    r, phi = measure(pose, txy)
                    psi = scan_off_boresight(pose, caps, txy)
                    R = noise_covariance(noise, r, psi)
                    z = (
                        r + math.sqrt(R[0, 0]) * rng.standard_normal(),
                        phi + math.sqrt(R[1, 1]) * rng.standard_normal(),
                    )
                    beliefs[j] = ekf_update(beliefs[j], pose, z, R)
                except (DegenerateGeometry, SingularInnovation) as e:
                    got = False
                    log.warnings.append(f"step {t + 1} sensor {i}: {e}")
            measured_row.append(got)
        bank = TrackBank(beliefs=tuple(beliefs), step=t + 1)

        for j in range(n_targets):
            tv = _truth_vector(truths[j])
            m = bank.beliefs[j].mean
            errors[t, j] = math.hypot(tv[0] - m.x, tv[1] - m.y)
        potentials[t] = current_potential
        log.truth.append([_truth_vector(x) for x in truths])
        log.beliefs.append(
            [(b.mean.as_vector().copy(), b.cov.copy()) for b in bank.beliefs]
        )
        log.executed.append(executed_row)
        log.measured.append(measured_row)

    metrics = RunMetrics(
        errors=errors,
        potentials=potentials,
        planner_calls=planner_calls,
        outer_iters=outer_iters,
        utility_evals=utility_evals,
        wall_time=time.perf_counter() - t0,
    )
    return metrics, log


# ---------------------------------------------------------------------------
# Monte Carlo


def _mc_worker(args) -> np.ndarray:
    cfg, seed = args
    metrics, _ = run_scenario(cfg, seed)
    return np.concatenate([metrics.errors.ravel(), metrics.potentials.ravel()])


def run_monte_carlo(
    cfg: ScenarioConfig, n_runs: int, base_seed: int, jobs: int = 1
) -> AggregateMetrics:
    """Independent seeded runs (seed = base_seed + index) with a deterministic
    ordered fold, so results do not depend on the parallelism degree."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    work = [(cfg, base_seed + i) for i in range(n_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            flat = list(ex.map(_mc_worker, work))
    else:
        flat = [_mc_worker(w) for w in work]
    steps, m = cfg.run.num_steps, len(cfg.targets)
    errors = np.stack([f[: steps * m].reshape(steps, m) for f in flat])
    potentials = np.stack([f[steps * m :] for f in flat])
    return AggregateMetrics(mode=cfg.planning.mode, errors=errors, potentials=potentials)


# ---------------------------------------------------------------------------
# emission


def render_csv(aggregates: list[AggregateMetrics]) -> str:
    """Stable CSV: one row per (step, mode, target); floats via repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "mode", "target_id", "rmse_mean", "rmse_std", "potential_mean"])
    for agg in aggregates:
        rm, rs, pm = agg.rmse_mean(), agg.rmse_std(), agg.potential_mean()
        for k in range(agg.num_steps):
            for j in range(agg.n_targets):
                w.writerow(
                    [k + 1, agg.mode, j, repr(float(rm[k, j])), repr(float(rs[k, j])),
                     repr(float(pm[k]))]
                )
    return buf.getvalue()


def render_json(aggregates: list[AggregateMetrics]) -> str:
    """Full per-run data, round-trippable via json.loads."""
    doc = []
    for agg in aggregates:
        doc.append(
            {
                "mode": agg.mode,
                "errors": agg.errors.tolist(),
                "potentials": agg.potentials.tolist(),
                "rmse_mean": agg.rmse_mean().tolist(),
                "rmse_std": agg.rmse_std().tolist(),
                "potential_mean": agg.potential_mean().tolist(),
            }
        )
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_results(
    aggregates: list[AggregateMetrics], fmt: str, path: str
) -> None:
    if fmt == "csv":
        text = render_csv(aggregates)
    elif fmt == "json":
        text = render_json(aggregates)
    else:
        raise ValueError(f"unknown format: {fmt!r}")
    with open(path, "w", newline="") as f:
        f.write(text)
