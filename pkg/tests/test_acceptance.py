"""Acceptance gate: nine end-to-end criteria, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines.
Each test prints ``ACCEPTANCE n (name): PASS|FAIL ...`` before asserting, so
a red criterion is still visible in the output with its measured numbers.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import subprocess
import sys
import time

import numpy as np
import pytest

import sensorgame
from sensorgame.config import load_config
from sensorgame.game import (
    PlanAction,
    PlayerId,
    SensorDef,
    build_tables,
    deviate,
    local_utility,
    potential,
    reachable_one_step,
    resolve_plan,
)
from sensorgame.gaussian_info import mutual_information
from sensorgame.instances import (
    player_locations,
    random_instance,
    random_plan,
    random_problem,
)
from sensorgame.models import (
    CvModel,
    RadarNoiseParams,
    SensorCaps,
    SensorPose,
    TargetState,
    candidate_locations,
    measure,
    measurement_jacobian,
)
from sensorgame.planner import LearnerParams, plan_myopic, plan_nonmyopic
from sensorgame.sim import run_monte_carlo
from sensorgame.tracker import TargetBelief, TrackBank, apply_linear_update, ekf_predict

SCENARIOS = sensorgame.__path__[0] + "/scenarios"


def verdict(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num} ({name}): {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def test_1_potential_alignment():
    """Every sampled unilateral deviation changes the player's utility by
    exactly the change in the global potential (500 instances, < 60 s)."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(500):
        tables = random_instance(
            rng,
            n_sensors=int(rng.integers(1, 4)),
            K=int(rng.integers(1, 4)),
            n_targets=int(rng.integers(1, 4)),
        )
        plan = random_plan(tables, rng)
        players = sorted(plan.actions)
        base_phi = potential(tables, plan)
        for _ in range(3):
            p = players[int(rng.integers(len(players)))]
            locs = player_locations(tables, plan.actions, p)
            action = PlanAction(
                locs[int(rng.integers(len(locs)))],
                int(rng.integers(tables.n_targets)),
            )
            du = local_utility(tables, p, action, plan) - local_utility(
                tables, p, plan.actions[p], plan
            )
            dphi = potential(tables, deviate(tables, plan, p, action)) - base_phi
            worst = max(worst, abs(du - dphi))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 60.0
    verdict(1, "potential alignment", ok,
            f"max |du - dphi| = {worst:.2e}, {elapsed:.1f}s for 500 instances")


def test_2_per_target_decomposition():
    """Sum of per-target MI terms equals the undecomposed joint MI."""
    from sensorgame.game import _co_observer_selections, _z_label, assemble_joint

    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        tables = random_instance(
            rng,
            n_sensors=int(rng.integers(1, 4)),
            K=int(rng.integers(1, 3)),
            n_targets=int(rng.integers(1, 4)),
        )
        plan = random_plan(tables, rng)
        total = 0.0
        for j in range(tables.n_targets):
            sels = _co_observer_selections(tables, plan, j, exclude=None)
            if sels:
                joint = assemble_joint(tables, j, sels)
                total += mutual_information(
                    joint, "x", tuple(_z_label(s) for s in sels)
                )
        worst = max(worst, abs(total - potential(tables, plan)))
    ok = worst < 1e-8
    verdict(2, "per-target decomposition", ok,
            f"max deviation = {worst:.2e} over 200 instances")


def _small_problem(rng):
    """Instance with <= 6 players and <= 10 actions per player: one target,
    a single move distance (9 candidate locations), free headings."""
    pos = rng.uniform(200.0, 400.0, size=2)
    vel = rng.uniform(-4.0, 4.0, size=2)
    cov = np.diag(rng.uniform([60.0, 60.0, 2.0, 2.0], [160.0, 160.0, 6.0, 6.0]))
    bank = TrackBank(
        beliefs=(TargetBelief(TargetState(*pos, *vel), cov, target_id=0),), step=0
    )
    model = CvModel(dt=1.0, q=float(rng.uniform(0.05, 0.3)))
    n_sensors = int(rng.integers(2, 4))
    K = 2 if n_sensors < 3 else int(rng.integers(1, 3))
    sensors = []
    for i in range(n_sensors):
        caps = SensorCaps(
            move_step_distances=(40.0, 40.0),  # dedups to 9 locations
            max_turn=math.pi,
            fov_half_angle=1.2,
            range_min=0.1,
            range_max=1500.0,
        )
        pose = SensorPose(
            x=float(rng.uniform(150.0, 450.0)),
            y=float(rng.uniform(150.0, 450.0)),
            z=300.0 + 40.0 * i,
            theta=float(rng.uniform(-math.pi, math.pi)),
        )
        sensors.append(SensorDef(pose, caps, RadarNoiseParams()))
    return bank, sensors, model, K


def test_3_nash_certificate():
    """On 100 seeded small instances, >= 99 converge and every converged
    plan survives an exhaustive feasible-deviation check at 1e-8."""
    rng = np.random.default_rng(99)
    converged = 0
    violations = 0
    for trial in range(100):
        bank, sensors, model, K = _small_problem(rng)
        res = plan_nonmyopic(bank, sensors, model, K,
                             LearnerParams(rng_seed=trial))
        if not res.converged:
            continue
        converged += 1
        tables = build_tables(bank, sensors, model, K)
        base = potential(tables, res.plan)
        for p in sorted(res.plan.actions):
            caps = tables.sensors[p.sensor].caps
            nxt = res.plan.actions.get(PlayerId(p.sensor, p.step + 1))
            for loc in player_locations(tables, res.plan.actions, p):
                if nxt is not None and not reachable_one_step(
                    caps, loc, nxt.location
                ):
                    continue
                cand = deviate(tables, res.plan, p, PlanAction(loc, 0))
                if potential(tables, cand) > base + 1e-8:
                    violations += 1
    ok = converged >= 99 and violations == 0
    verdict(3, "nash certificate", ok,
            f"{converged}/100 converged, {violations} improving deviations")


def test_4_optimality_gap():
    """Mean learner potential >= 90% of the brute-force optimum on 50
    enumerable instances; the ratio distribution is reported."""
    rng = np.random.default_rng(4)
    ratios = []
    while len(ratios) < 50:
        n_targets = int(rng.integers(1, 3))
        bank, sensors, model = random_problem(
            rng, n_sensors=2, n_targets=n_targets, free_heading=True
        )
        tables = build_tables(bank, sensors, model, 1)
        per_sensor = []
        for s in sensors:
            locs = candidate_locations((s.pose.x, s.pose.y), s.caps, 1)
            per_sensor.append(
                [(loc, j) for loc in locs for j in range(n_targets)]
            )
        best = 0.0
        for combo in itertools.product(*per_sensor):
            actions = {
                PlayerId(i, 1): PlanAction(*combo[i]) for i in range(2)
            }
            best = max(best, potential(tables, resolve_plan(tables, actions)))
        if best <= 1e-9:
            continue
        res = plan_nonmyopic(bank, sensors, model, 1,
                             LearnerParams(rng_seed=len(ratios)))
        ratios.append(res.potential_value / best)
    ratios = np.array(ratios)
    mean = float(ratios.mean())
    ok = mean >= 0.90
    q = np.percentile(ratios, [0, 25, 50, 75, 100])
    verdict(4, "optimality gap", ok,
            f"mean ratio = {mean:.4f}, quartiles = "
            f"[{q[0]:.3f}, {q[1]:.3f}, {q[2]:.3f}, {q[3]:.3f}, {q[4]:.3f}]")


def test_5_sensor_hole():
    """Bundled hole scenario: myopic potential is 0 at the first decision,
    K=4 planning attains > 0, and final-step RMSE improves >= 25%."""
    t0 = time.perf_counter()
    cfg = load_config(SCENARIOS + "/hole.toml")
    myo_cfg = dataclasses.replace(
        cfg, planning=dataclasses.replace(cfg.planning, mode="myopic")
    )
    agg_ol = run_monte_carlo(cfg, 20, cfg.run.seed)
    agg_my = run_monte_carlo(myo_cfg, 20, cfg.run.seed)
    myopic_first = float(np.max(agg_my.potentials[:, 0]))
    nonmyopic_first = float(np.min(agg_ol.potentials[:, 0]))
    r_ol = float(agg_ol.rmse_mean()[-1, 0])
    r_my = float(agg_my.rmse_mean()[-1, 0])
    improvement = 1.0 - r_ol / r_my
    elapsed = time.perf_counter() - t0
    ok = (
        myopic_first == 0.0
        and nonmyopic_first > 0.0
        and improvement >= 0.25
        and elapsed < 300.0
    )
    verdict(5, "sensor hole", ok,
            f"myopic first potential = {myopic_first}, non-myopic min first "
            f"potential = {nonmyopic_first:.3f}, final RMSE {r_ol:.2f} vs "
            f"{r_my:.2f} ({improvement:.0%} lower), {elapsed:.0f}s")


def test_6_rmse_orderings():
    """Survey scenario, 20 MC runs per mode: CV targets must order
    OLF <= OL <= myopic and Dubins targets OL >= myopic, OLF <= myopic over
    the final third, each margin outside one (paired) standard error."""
    t0 = time.perf_counter()
    cfg = load_config(SCENARIOS + "/survey.toml")
    aggs = {}
    for mode in ("myopic", "ol", "olf"):
        mcfg = dataclasses.replace(
            cfg, planning=dataclasses.replace(cfg.planning, mode=mode)
        )
        aggs[mode] = run_monte_carlo(mcfg, 20, cfg.run.seed)
    cv = [i for i, t in enumerate(cfg.targets) if t.kind == "cv"]
    db = [i for i, t in enumerate(cfg.targets) if t.kind == "dubins"]
    steps = cfg.run.num_steps
    final = slice(2 * steps // 3, steps)

    def per_run(mode, idx):
        return aggs[mode].errors[:, final, :][:, :, idx].mean(axis=(1, 2))

    results = []
    for label, bigger, smaller, idx in (
        ("cv: OL >= OLF", "ol", "olf", cv),
        ("cv: myopic >= OL", "myopic", "ol", cv),
        ("dubins: OL >= myopic", "ol", "myopic", db),
        ("dubins: myopic >= OLF", "myopic", "olf", db),
    ):
        d = per_run(bigger, idx) - per_run(smaller, idx)
        se = float(d.std(ddof=1) / np.sqrt(len(d)))
        results.append((label, float(d.mean()), se, d.mean() > se))
    elapsed = time.perf_counter() - t0
    ok = all(r[3] for r in results) and elapsed < 900.0
    detail = "; ".join(
        f"{lbl}: diff={m:.2f} se={s:.2f} {'ok' if good else 'VIOLATED'}"
        for lbl, m, s, good in results
    )
    verdict(6, "rmse orderings", ok, f"{detail}; {elapsed:.0f}s")


def test_7_ekf_oracles():
    """Linear-measurement surrogate equals the closed-form Kalman filter to
    1e-10 over 100 steps; Jacobians match finite differences on 1000
    geometries to 1e-5 relative."""
    rng = np.random.default_rng(77)
    model = CvModel(dt=1.0, q=0.2)
    H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])
    R = np.diag([4.0, 4.0])
    belief = TargetBelief(
        TargetState(0.0, 0.0, 1.0, 1.0), np.diag([25.0, 25.0, 4.0, 4.0]), 0
    )
    mean = belief.mean.as_vector().copy()
    cov = belief.cov.copy()
    from sensorgame.models import cv_transition

    F, Q = cv_transition(model, 1)
    worst_filter = 0.0
    for _ in range(100):
        belief = ekf_predict(belief, model)
        mean = F @ mean
        cov = F @ cov @ F.T + Q
        z = H @ mean + rng.normal(0.0, 2.0, size=2)
        innov = z - H @ belief.mean.as_vector()
        belief = apply_linear_update(belief, H, innov, R)
        S = H @ cov @ H.T + R
        K = cov @ H.T @ np.linalg.inv(S)
        mean = mean + K @ (z - H @ mean)
        cov = (np.eye(4) - K @ H) @ cov
        cov = 0.5 * (cov + cov.T)
        worst_filter = max(
            worst_filter,
            float(np.max(np.abs(belief.mean.as_vector() - mean))),
            float(np.max(np.abs(belief.cov - cov))),
        )

    worst_jac = 0.0
    h = 1e-5
    for _ in range(1000):
        pose = SensorPose(
            x=float(rng.uniform(-500, 500)),
            y=float(rng.uniform(-500, 500)),
            z=float(rng.uniform(50, 500)),
            theta=float(rng.uniform(-math.pi, math.pi)),
        )
        txy = rng.uniform(-500, 500, size=2)
        if math.hypot(txy[0] - pose.x, txy[1] - pose.y) < 1.0:
            continue
        state = TargetState(float(txy[0]), float(txy[1]), 0.0, 0.0)
        J = measurement_jacobian(pose, state)
        for col, delta in enumerate(((h, 0.0), (0.0, h))):
            zp = measure(pose, (txy[0] + delta[0], txy[1] + delta[1]))
            zm = measure(pose, (txy[0] - delta[0], txy[1] - delta[1]))
            fd = ((zp[0] - zm[0]) / (2 * h), (zp[1] - zm[1]) / (2 * h))
            for row in range(2):
                scale = max(abs(J[row, col]), 1.0)
                worst_jac = max(worst_jac, abs(fd[row] - J[row, col]) / scale)
    ok = worst_filter < 1e-10 and worst_jac < 1e-5
    verdict(7, "ekf oracles", ok,
            f"filter max dev = {worst_filter:.2e}, jacobian max rel dev = "
            f"{worst_jac:.2e}")


def test_8_complexity_sanity():
    """Full utility-sweep wall time grows at most cubically in N*K
    (log-log slope <= 3.5 over N*K in 2..12)."""
    from sensorgame.game import sweep_utilities
    from sensorgame.instances import player_locations as plocs

    rng = np.random.default_rng(8)
    sizes, times = [], []
    for nk in range(2, 13):
        # factor N*K with N <= 3 (sensor count), remainder into the horizon
        n = 2 if nk % 2 == 0 else 1
        K = nk // n
        bank, sensors, model = random_problem(
            rng, n_sensors=n, n_targets=2, free_heading=True
        )
        tables = build_tables(bank, sensors, model, K)
        plan = random_plan(tables, rng)
        reps = 3
        t0 = time.perf_counter()
        for _ in range(reps):
            for p in sorted(plan.actions):
                sweep_utilities(tables, plan, p, plocs(tables, plan.actions, p))
        dt = (time.perf_counter() - t0) / reps
        sizes.append(nk)
        times.append(dt)
    slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    ok = slope <= 3.5
    verdict(8, "complexity sanity", ok,
            f"log-log slope = {slope:.2f} over N*K in 2..12")


def test_9_compare_determinism(tmp_path):
    """`compare` yields byte-identical CSV across invocations and across
    --jobs in {1, 4}."""
    outs = []
    for name, jobs in (("a.csv", 1), ("b.csv", 1), ("c.csv", 4)):
        out = tmp_path / name
        r = subprocess.run(
            [sys.executable, "-m", "sensorgame.cli", "compare",
             "--config", SCENARIOS + "/hole.toml", "--seed", "42",
             "--runs", "3", "--jobs", str(jobs), "--out", str(out)],
            capture_output=True, text=True, timeout=600,
        )
        assert r.returncode == 0, r.stderr
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    verdict(9, "compare determinism", ok,
            f"{len(outs[0])} bytes, identical across 2 invocations and "
            f"--jobs 1/4: {ok}")
