"""JSFP-based double-loop learner with backward DP initialization, plus the
myopic two-step baseline.

The learner plays a repeated game per horizon step (inner loop) and sweeps the
steps backward repeatedly (outer loop). Players best-respond to running
averages of their utilities, keep their current action with inertia
probability alpha, and each inner repeated game continues with probability
beta per iteration. Tie-breaking is lexicographic by (location index, target
index) everywhere, which keeps the whole procedure deterministic for a fixed
seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .game import (
    GameTables,
    JointPlan,
    PlanAction,
    PlayerId,
    SensorDef,
    apply_action,
    build_tables,
    reachable_one_step,
    resolve_plan,
    potential,
    sweep_utilities,
)
from .models import CvModel, candidate_locations
from .tracker import TrackBank

__all__ = [
    "LearnerParams",
    "PlanResult",
    "initialize_backward",
    "run_inner_jsfp",
    "plan_nonmyopic",
    "plan_myopic",
]

# Utility comparisons treat differences below this as ties.
_TIE_TOL = 1e-12


@dataclass(frozen=True)
class LearnerParams:
    alpha: float = 0.3
    beta: float = 0.85
    max_inner_iters: int = 100
    max_outer_iters: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must be in (0, 1)")
        if not (0.0 < self.beta < 1.0):
            raise ValueError("beta must be in (0, 1)")


@dataclass
class PlanResult:
    plan: JointPlan
    potential_value: float
    outer_iters: int
    total_utility_evals: int
    converged: bool
    iteration_cap_hit: bool = False


def _argmax_lexicographic(u: np.ndarray) -> tuple[int, int]:
    """First (row, col) attaining the max within tie tolerance."""
    best = float(np.max(u))
    rows, cols = np.nonzero(u >= best - _TIE_TOL)
    return int(rows[0]), int(cols[0])


def _nearest(points: list[tuple[float, float]], xy: tuple[float, float]):
    return min(points, key=lambda p: (math.hypot(p[0] - xy[0], p[1] - xy[1]), p))


def initialize_backward(tables: GameTables) -> JointPlan:
    """Dynamic-programming-style initialization from the last step backward.

    At step k each sensor greedily picks the best (location, target) over its
    k-step reachable region, conditioning on the decisions already fixed at
    later steps. Zero-utility ties prefer the location closest to the sensor's
    next-step choice, so the chain stays nearly feasible; a forward projection
    pass then repairs any remaining single-step violations.
    """
    K = tables.K
    actions: dict[PlayerId, PlanAction] = {}
    for k in range(K, 0, -1):
        partial = resolve_plan(tables, actions)
        for i, sdef in enumerate(tables.sensors):
            player = PlayerId(i, k)
            locs = candidate_locations((sdef.pose.x, sdef.pose.y), sdef.caps, k)
            u = sweep_utilities(tables, partial, player, locs, free_heading=True)
            best = float(np.max(u))
            rows, cols = np.nonzero(u >= best - _TIE_TOL)
            nxt = actions.get(PlayerId(i, k + 1))
            if nxt is not None:
                # prefer tied locations nearest the already-fixed next step
                order = sorted(
                    range(len(rows)),
                    key=lambda t: (
                        math.hypot(
                            locs[rows[t]][0] - nxt.location[0],
                            locs[rows[t]][1] - nxt.location[1],
                        ),
                        rows[t],
                        cols[t],
                    ),
                )
                r, c = int(rows[order[0]]), int(cols[order[0]])
            else:
                r, c = int(rows[0]), int(cols[0])
            actions[player] = PlanAction(locs[r], c)
    # forward feasibility repair: project each step onto the single-step
    # candidate set of its (repaired) predecessor
    for i, sdef in enumerate(tables.sensors):
        prev = (sdef.pose.x, sdef.pose.y)
        for k in range(1, K + 1):
            p = PlayerId(i, k)
            loc = actions[p].location
            if not reachable_one_step(sdef.caps, prev, loc):
                loc = _nearest(candidate_locations(prev, sdef.caps, 1), loc)
                actions[p] = PlanAction(loc, actions[p].target)
            prev = loc
    return resolve_plan(tables, actions)


def _step_action_sets(
    tables: GameTables, plan: JointPlan, k: int
) -> list[list[tuple[float, float]]]:
    """Per-sensor location sets for the inner game at step k: one-step
    reachable from the step k-1 location, and keeping step k+1 reachable."""
    sets = []
    for i, sdef in enumerate(tables.sensors):
        if k == 1:
            prev = (sdef.pose.x, sdef.pose.y)
        else:
            prev = plan.actions[PlayerId(i, k - 1)].location
        locs = candidate_locations(prev, sdef.caps, 1)
        if k < tables.K:
            nxt = plan.actions[PlayerId(i, k + 1)].location
            locs = [p for p in locs if reachable_one_step(sdef.caps, p, nxt)]
        sets.append(locs)
    return sets


def run_inner_jsfp(
    tables: GameTables,
    plan: JointPlan,
    k: int,
    params: LearnerParams,
    rng: np.random.Generator,
) -> tuple[JointPlan, bool, int, int, bool]:
    """One inner repeated game at horizon step k: players best-respond to
    running-average utilities with inertia alpha; each iteration the game
    continues with probability beta.

    Returns (plan, converged, iterations, utility_evals, cap_hit).
    ``converged`` is true only when an update-enabled iteration ended with
    every player's current action a best response to the current profile.
    """
    n = tables.n_sensors
    loc_sets = _step_action_sets(tables, plan, k)
    # snap current locations onto the exact candidate tuples (k-fold composed
    # initialization points can differ from 1-step candidates by rounding)
    for i in range(n):
        p = PlayerId(i, k)
        cur = plan.actions[p]
        if cur.location not in loc_sets[i]:
            loc = _nearest(loc_sets[i], cur.location)
            plan = apply_action(tables, plan, p, PlanAction(loc, cur.target))
    ubar = [np.zeros((len(loc_sets[i]), tables.n_targets)) for i in range(n)]
    t = 0
    evals = 0
    converged = False
    cap_hit = False
    while True:
        if t >= params.max_inner_iters:
            cap_hit = True
            break
        exit_in = rng.random() > params.beta
        t += 1
        us = []
        for i in range(n):
            u = sweep_utilities(tables, plan, PlayerId(i, k), loc_sets[i])
            evals += u.size
            ubar[i] = ((t - 1) / t) * ubar[i] + (1.0 / t) * u
            us.append(u)
        changed = False
        if not exit_in:
            for i in range(n):
                r, c = _argmax_lexicographic(ubar[i])
                best_action = PlanAction(loc_sets[i][r], c)
                current = plan.actions[PlayerId(i, k)]
                if best_action != current and rng.random() > params.alpha:
                    plan = apply_action(tables, plan, PlayerId(i, k), best_action)
                    changed = True
        # Nash-at-step check against the utilities of the (unchanged) profile:
        # only meaningful when no update fired this iteration.
        if not changed:
            at_best = True
            for i in range(n):
                cur = plan.actions[PlayerId(i, k)]
                try:
                    r = loc_sets[i].index(cur.location)
                except ValueError:
                    at_best = False
                    break
                if us[i][r, cur.target] < float(np.max(us[i])) - _TIE_TOL:
                    at_best = False
                    break
            if at_best:
                converged = True
                break
        if exit_in:
            break
    return plan, converged, t, evals, cap_hit


def plan_nonmyopic(
    bank: TrackBank,
    sensors: list[SensorDef] | tuple[SensorDef, ...],
    model: CvModel,
    K: int,
    params: LearnerParams,
) -> PlanResult:
    """Full double-loop learning: backward initialization, then outer sweeps
    k = K..1 of inner JSFP games until no action changes."""
    rng = np.random.default_rng(params.rng_seed)
    tables = build_tables(bank, sensors, model, K)
    plan = initialize_backward(tables)
    total_evals = 0
    cap_hit = False
    converged = False
    outer = 0
    for outer in range(1, params.max_outer_iters + 1):
        before = dict(plan.actions)
        all_inner_ok = True
        for k in range(K, 0, -1):
            plan, conv_k, _, evals, hit = run_inner_jsfp(tables, plan, k, params, rng)
            cap_hit = cap_hit or hit
            total_evals += evals
            all_inner_ok = all_inner_ok and conv_k
        if plan.actions == before and all_inner_ok:
            converged = True
            break
    if not converged and outer >= params.max_outer_iters:
        cap_hit = True
    return PlanResult(
        plan=plan,
        potential_value=potential(tables, plan),
        outer_iters=outer,
        total_utility_evals=total_evals,
        converged=converged,
        iteration_cap_hit=cap_hit,
    )


# ---------------------------------------------------------------------------
# myopic baseline: 2-step horizon, one shared target per sensor


def _myopic_actions(tables: GameTables, sensor: int):
    """Composite actions (loc1, loc2, target) with loc2 reachable from loc1,
    in lexicographic order."""
    sdef = tables.sensors[sensor]
    out = []
    for loc1 in candidate_locations((sdef.pose.x, sdef.pose.y), sdef.caps, 1):
        for loc2 in candidate_locations(loc1, sdef.caps, 1):
            for j in range(tables.n_targets):
                out.append((loc1, loc2, j))
    return out


def _composite_to_plan_actions(actions_by_sensor) -> dict[PlayerId, PlanAction]:
    d = {}
    for i, (loc1, loc2, j) in enumerate(actions_by_sensor):
        d[PlayerId(i, 1)] = PlanAction(loc1, j)
        d[PlayerId(i, 2)] = PlanAction(loc2, j)
    return d


def _myopic_sweep(
    tables: GameTables, plan: JointPlan, sensor: int, actions
) -> np.ndarray:
    """Utilities of every composite action of one sensor against the frozen
    profile: I(x_2; z_1, z_2 | co-observers), sharing conditionals per target."""
    from .game import (
        Selection,
        _chain_heading,
        _co_observer_selections,
        _measurement_blocks,
        detects,
    )
    from .gaussian_info import JointGaussian, conditional_covariance, log_det

    sdef = tables.sensors[sensor]
    theta0 = sdef.pose.theta
    exclude = {PlayerId(sensor, 1), PlayerId(sensor, 2)}
    out = np.zeros(len(actions))
    # per-target conditionals of (x_1, x_2) given co-observer measurements
    cond: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for j in range(tables.n_targets):
        co = [
            s
            for s in _co_observer_selections(tables, plan, j, exclude=None)
            if s.player not in exclude
        ]
        P1 = tables.pred_covs[j][0]
        P2 = tables.pred_covs[j][1]
        F1 = tables.trans[1]
        n = len(co)
        labels = ["x1", "x2"] + [f"c{b}" for b in range(n)]
        dims = [4, 4] + [2] * n
        cov = np.zeros((8 + 2 * n, 8 + 2 * n))
        cov[:4, :4] = P1
        cov[4:8, 4:8] = P2
        cov[:4, 4:8] = P1 @ F1.T
        cov[4:8, :4] = F1 @ P1
        HRs = [_measurement_blocks(tables, s, j) for s in co]
        for b, (s, (Hb, Rb)) in enumerate(zip(co, HRs)):
            l = s.player.step
            Pl = tables.pred_covs[j][l - 1]
            rb = 8 + 2 * b
            cx1 = (P1 @ F1.T @ Hb.T) if l == 2 else (P1 @ Hb.T)
            cx2 = (P2 @ Hb.T) if l == 2 else (F1 @ P1 @ Hb.T)
            cov[:4, rb : rb + 2] = cx1
            cov[rb : rb + 2, :4] = cx1.T
            cov[4:8, rb : rb + 2] = cx2
            cov[rb : rb + 2, 4:8] = cx2.T
            cov[rb : rb + 2, rb : rb + 2] = Hb @ Pl @ Hb.T + Rb
            for c2 in range(b + 1, n):
                s2 = co[c2]
                Hc, _ = HRs[c2]
                m = s2.player.step
                rc = 8 + 2 * c2
                lo = min(l, m)
                Plo = tables.pred_covs[j][lo - 1]
                if l <= m:
                    Czz = Hb @ Plo @ tables.trans[m - l].T @ Hc.T
                else:
                    Czz = Hb @ tables.trans[l - m] @ Plo @ Hc.T
                cov[rb : rb + 2, rc : rc + 2] = Czz
                cov[rc : rc + 2, rb : rb + 2] = Czz.T
        joint = JointGaussian(tuple(labels), tuple(dims), cov)
        zl = tuple(labels[2:])
        B1 = conditional_covariance(joint, ("x1", "x2"), zl)
        B2 = conditional_covariance(joint, "x1", ("x2",) + zl)
        cond[j] = (B1, B2)

    for a, (loc1, loc2, j) in enumerate(actions):
        h1 = _chain_heading(tables, theta0, PlayerId(sensor, 1), PlanAction(loc1, j))
        h2 = _chain_heading(tables, h1, PlayerId(sensor, 2), PlanAction(loc2, j))
        s1 = Selection(PlayerId(sensor, 1), loc1, h1)
        s2 = Selection(PlayerId(sensor, 2), loc2, h2)
        d1 = detects(tables, s1, j)
        d2 = detects(tables, s2, j)
        if not (d1 or d2):
            continue
        B1, B2 = cond[j]
        blocks = []
        if d1:
            blocks.append((1, *_measurement_blocks(tables, s1, j)))
        if d2:
            blocks.append((2, *_measurement_blocks(tables, s2, j)))
        m = len(blocks)
        S1 = np.zeros((2 * m, 2 * m))
        S2 = np.zeros((2 * m, 2 * m))
        for bi, (step_b, Hb, Rb) in enumerate(blocks):
            sb = slice(4 * (step_b - 1), 4 * step_b)
            for ci, (step_c, Hc, Rc) in enumerate(blocks):
                sc = slice(4 * (step_c - 1), 4 * step_c)
                blk1 = Hb @ B1[sb, sc] @ Hc.T
                if step_b == 1 and step_c == 1:
                    blk2 = Hb @ B2 @ Hc.T
                else:
                    blk2 = np.zeros((2, 2))
                if bi == ci:
                    blk1 = blk1 + Rb
                    blk2 = blk2 + Rb
                S1[2 * bi : 2 * bi + 2, 2 * ci : 2 * ci + 2] = blk1
                S2[2 * bi : 2 * bi + 2, 2 * ci : 2 * ci + 2] = blk2
        out[a] = max(0.5 * (log_det(S1) - log_det(S2)), 0.0)
    return out


def plan_myopic(
    bank: TrackBank,
    sensors: list[SensorDef] | tuple[SensorDef, ...],
    model: CvModel,
    params: LearnerParams,
) -> PlanResult:
    """Two-step planning with a single shared target choice per sensor,
    solved by the same averaged best-response dynamics."""
    rng = np.random.default_rng(params.rng_seed)
    tables = build_tables(bank, sensors, model, 2)
    action_sets = [_myopic_actions(tables, i) for i in range(tables.n_sensors)]
    current = [acts[0] for acts in action_sets]
    plan = resolve_plan(tables, _composite_to_plan_actions(current))
    ubar = [np.zeros(len(acts)) for acts in action_sets]
    t = 0
    evals = 0
    converged = False
    cap_hit = False
    while True:
        if t >= params.max_inner_iters:
            cap_hit = True
            break
        exit_in = rng.random() > params.beta
        t += 1
        us = []
        for i in range(tables.n_sensors):
            u = _myopic_sweep(tables, plan, i, action_sets[i])
            evals += u.size
            ubar[i] = ((t - 1) / t) * ubar[i] + (1.0 / t) * u
            us.append(u)
        changed = False
        if not exit_in:
            for i in range(tables.n_sensors):
                best_idx = int(np.nonzero(ubar[i] >= np.max(ubar[i]) - _TIE_TOL)[0][0])
                if action_sets[i][best_idx] != current[i] and rng.random() > params.alpha:
                    current[i] = action_sets[i][best_idx]
                    plan = resolve_plan(tables, _composite_to_plan_actions(current))
                    changed = True
        if not changed:
            at_best = all(
                us[i][action_sets[i].index(current[i])]
                >= float(np.max(us[i])) - _TIE_TOL
                for i in range(tables.n_sensors)
            )
            if at_best:
                converged = True
                break
        if exit_in:
            break
    return PlanResult(
        plan=plan,
        potential_value=potential(tables, plan),
        outer_iters=t,
        total_utility_evals=evals,
        converged=converged,
        iteration_cap_hit=cap_hit,
    )
