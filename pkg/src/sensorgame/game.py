"""Potential-game construction for non-myopic sensor planning.

Players are (sensor, horizon step) pairs; an action is a sensing location plus
a target choice. A player's utility is the conditional mutual information its
measurement adds about its chosen target's state at the end of the horizon,
given the measurements of everyone else observing the same target. The sum of
per-target joint informations is the potential.

Headings are derived, not chosen: each sensor's heading chain is re-resolved
from the executed pose through its planned locations toward the selected
targets. During utility evaluation the chain of every *other* player is held
frozen (a deviator re-resolves only its own heading from the frozen upstream
chain), which is what makes the utility an exact marginal contribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gaussian_info import (
    DimensionMismatch,
    JointGaussian,
    conditional_covariance,
    log_det,
    mutual_information,
)
from .models import (
    CvModel,
    RadarNoiseParams,
    SensorCaps,
    SensorPose,
    cv_transition,
    in_sensing_region,
    measurement_jacobian,
    measure,
    noise_covariance,
    resolve_heading,
    scan_off_boresight,
)
from .tracker import TargetState, TrackBank, normalize_models, predict_horizon

__all__ = [
    "PlayerId",
    "PlanAction",
    "JointPlan",
    "SensorDef",
    "GameTables",
    "Selection",
    "build_tables",
    "assemble_joint",
    "local_utility",
    "potential",
    "reachable_one_step",
]

# Beam scan angles at (or numerically past) pi/2 mean the target is outside
# any physically meaningful beam; treated as no detection.
_MAX_SCAN_COS = 1e-6


@dataclass(frozen=True, order=True)
class PlayerId:
    sensor: int
    step: int  # 1-based horizon step


@dataclass(frozen=True)
class PlanAction:
    location: tuple[float, float]
    target: int


@dataclass(frozen=True)
class SensorDef:
    pose: SensorPose
    caps: SensorCaps
    noise: RadarNoiseParams


@dataclass(frozen=True)
class GameTables:
    """Horizon predictions and transition powers shared by all utility calls."""

    model: CvModel
    K: int
    sensors: tuple[SensorDef, ...]
    pred_means: tuple[tuple[np.ndarray, ...], ...]  # [target][k-1] -> 4-vector
    pred_covs: tuple[tuple[np.ndarray, ...], ...]  # [target][k-1] -> 4x4
    trans: tuple[np.ndarray, ...]  # trans[d] = F_d (d-step transition), F_0 = I
    # memo caches keyed by (sensor, step, location, heading, target); every
    # input the cached values depend on is fixed for the tables' lifetime
    detect_cache: dict = field(default_factory=dict, repr=False, compare=False)
    blocks_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_targets(self) -> int:
        return len(self.pred_means)

    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    def predicted_xy(self, target: int, step: int) -> tuple[float, float]:
        m = self.pred_means[target][step - 1]
        return (float(m[0]), float(m[1]))


def build_tables(
    bank: TrackBank, sensors: list[SensorDef] | tuple[SensorDef, ...],
    model, K: int,
) -> GameTables:
    """Precompute everything about targets the repeated game will reuse.

    ``model`` is one CvModel or a per-target sequence sharing dt (the
    transition F depends on dt only; per-target process noise enters
    through the predicted covariances).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    models = normalize_models(model, len(bank.beliefs))
    horizon = predict_horizon(bank, models, K)
    F1, _ = cv_transition(models[0], 1)
    trans = [np.eye(4)]
    for _ in range(K - 1):
        trans.append(F1 @ trans[-1])
    return GameTables(
        model=models[0],
        K=K,
        sensors=tuple(sensors),
        pred_means=tuple(tuple(mean for mean, _ in steps) for steps in horizon),
        pred_covs=tuple(tuple(cov for _, cov in steps) for steps in horizon),
        trans=tuple(trans),
    )


@dataclass(frozen=True)
class Selection:
    """One concrete measurement slot: who, where, with what heading."""

    player: PlayerId
    location: tuple[float, float]
    heading: float


@dataclass(frozen=True)
class JointPlan:
    """A full strategy profile with its derived heading chains."""

    actions: dict[PlayerId, PlanAction]
    headings: dict[PlayerId, float]

    def action(self, player: PlayerId) -> PlanAction:
        return self.actions[player]

    def players(self) -> list[PlayerId]:
        return sorted(self.actions)


def _chain_heading(
    tables: GameTables,
    prev_theta: float,
    player: PlayerId,
    action: PlanAction,
) -> float:
    caps = tables.sensors[player.sensor].caps
    target_xy = tables.predicted_xy(action.target, player.step)
    return resolve_heading(prev_theta, caps, action.location, target_xy)


def resolve_plan(tables: GameTables, actions: dict[PlayerId, PlanAction]) -> JointPlan:
    """Build a JointPlan with heading chains fully re-resolved from step 1."""
    headings: dict[PlayerId, float] = {}
    for i, sdef in enumerate(tables.sensors):
        theta = sdef.pose.theta
        for k in range(1, tables.K + 1):
            p = PlayerId(i, k)
            if p not in actions:
                continue
            theta = _chain_heading(tables, theta, p, actions[p])
            headings[p] = theta
    return JointPlan(actions=dict(actions), headings=headings)


def deviate(tables: GameTables, plan: JointPlan, player: PlayerId,
            action: PlanAction) -> JointPlan:
    """Unilateral deviation with every other heading frozen.

    Only the deviator's own heading is re-resolved (from the frozen heading of
    its previous step); downstream headings keep their snapshot values. This
    is the deviation operator under which utilities and the potential align.
    """
    actions = dict(plan.actions)
    actions[player] = action
    headings = dict(plan.headings)
    prev = _prev_heading(tables, plan, player)
    headings[player] = _chain_heading(tables, prev, player, action)
    return JointPlan(actions=actions, headings=headings)


def apply_action(tables: GameTables, plan: JointPlan, player: PlayerId,
                 action: PlanAction) -> JointPlan:
    """Accept an action change and re-resolve the sensor's downstream heading
    chain (steps >= the changed one). Used when a plan actually mutates, as
    opposed to ``deviate`` which evaluates a hypothetical."""
    actions = dict(plan.actions)
    actions[player] = action
    headings = dict(plan.headings)
    theta = _prev_heading(tables, plan, player)
    for k in range(player.step, tables.K + 1):
        p = PlayerId(player.sensor, k)
        if p not in actions:
            continue
        theta = _chain_heading(tables, theta, p, actions[p])
        headings[p] = theta
    return JointPlan(actions=actions, headings=headings)


def _prev_heading(tables: GameTables, plan: JointPlan, player: PlayerId) -> float:
    if player.step == 1:
        return tables.sensors[player.sensor].pose.theta
    return plan.headings[PlayerId(player.sensor, player.step - 1)]


def _selection_pose(tables: GameTables, sel: Selection) -> SensorPose:
    sdef = tables.sensors[sel.player.sensor]
    return SensorPose(sel.location[0], sel.location[1], sdef.pose.z, sel.heading)


def detects(tables: GameTables, sel: Selection, target: int) -> bool:
    """Whether the selection yields a measurement of the target at its step."""
    key = (sel.player, sel.location, sel.heading, target)
    hit = tables.detect_cache.get(key)
    if hit is not None:
        return hit
    out = _detects_uncached(tables, sel, target)
    tables.detect_cache[key] = out
    return out


def _detects_uncached(tables: GameTables, sel: Selection, target: int) -> bool:
    sdef = tables.sensors[sel.player.sensor]
    pose = _selection_pose(tables, sel)
    target_xy = tables.predicted_xy(target, sel.player.step)
    if math.hypot(target_xy[0] - pose.x, target_xy[1] - pose.y) < 1e-6:
        return False  # azimuth undefined directly below the sensor
    if not in_sensing_region(pose, sdef.caps, target_xy):
        return False
    psi = scan_off_boresight(pose, sdef.caps, target_xy)
    return math.cos(psi) > _MAX_SCAN_COS


def _measurement_blocks(
    tables: GameTables, sel: Selection, target: int
) -> tuple[np.ndarray, np.ndarray]:
    """(H, R) for a selection, linearized at the predicted target mean."""
    key = (sel.player, sel.location, sel.heading, target)
    hit = tables.blocks_cache.get(key)
    if hit is not None:
        return hit
    sdef = tables.sensors[sel.player.sensor]
    pose = _selection_pose(tables, sel)
    mean = tables.pred_means[target][sel.player.step - 1]
    pred = TargetState.from_vector(mean)
    H = measurement_jacobian(pose, pred)
    r, _ = measure(pose, (pred.x, pred.y))
    psi = scan_off_boresight(pose, sdef.caps, (pred.x, pred.y))
    R = noise_covariance(sdef.noise, r, psi)
    tables.blocks_cache[key] = (H, R)
    return H, R


def _z_label(sel: Selection) -> str:
    return f"z{sel.player.sensor}_{sel.player.step}"


def assemble_joint(
    tables: GameTables, target: int, selections: list[Selection]
) -> JointGaussian:
    """Joint Gaussian over the target's terminal state and the selected
    measurement variables, assembled from the precomputed horizon tables.

    Cross-covariances follow from the open-loop model: for steps k <= l,
    Cov(x_k, x_l) = P(x_k, x_k) F_{l-k}', measurements enter through their
    linearized H blocks plus independent noise R.
    """
    K = tables.K
    sels = sorted(selections, key=lambda s: (s.player.step, s.player.sensor))
    HR = [_measurement_blocks(tables, s, target) for s in sels]
    n = len(sels)
    labels = ["x"] + [_z_label(s) for s in sels]
    if len(set(labels)) != len(labels):
        raise DimensionMismatch("duplicate measurement slots in selection set")
    dims = [4] + [2] * n
    total = 4 + 2 * n
    cov = np.zeros((total, total))
    PxK = tables.pred_covs[target][K - 1]
    cov[:4, :4] = PxK
    for a, (sel, (H, R)) in enumerate(zip(sels, HR)):
        k = sel.player.step
        Pk = tables.pred_covs[target][k - 1]
        ra = 4 + 2 * a
        # Cov(z_k, x_K) = H_k P(x_k, x_k) F_{K-k}'
        Czx = H @ Pk @ tables.trans[K - k].T
        cov[ra : ra + 2, :4] = Czx
        cov[:4, ra : ra + 2] = Czx.T
        cov[ra : ra + 2, ra : ra + 2] = H @ Pk @ H.T + R
        for b in range(a + 1, n):
            sel_b = sels[b]
            Hb, _ = HR[b]
            l = sel_b.player.step
            rb = 4 + 2 * b
            # steps sorted ascending: k <= l
            Czz = H @ Pk @ tables.trans[l - k].T @ Hb.T
            cov[ra : ra + 2, rb : rb + 2] = Czz
            cov[rb : rb + 2, ra : ra + 2] = Czz.T
    return JointGaussian(labels=tuple(labels), dims=tuple(dims), cov=cov)


def _co_observer_selections(
    tables: GameTables, plan: JointPlan, target: int, exclude: PlayerId | None
) -> list[Selection]:
    out = []
    for p in sorted(plan.actions):
        if p == exclude:
            continue
        act = plan.actions[p]
        if act.target != target:
            continue
        sel = Selection(p, act.location, plan.headings[p])
        if detects(tables, sel, target):
            out.append(sel)
    return out


def local_utility(
    tables: GameTables,
    me: PlayerId,
    my_action: PlanAction,
    others: JointPlan,
) -> float:
    """Marginal-contribution utility of one player's candidate action.

    I(x_K^(j); z_me | measurements of co-observers of j), zero when the
    candidate pose cannot detect the predicted target position.
    """
    j = my_action.target
    prev = _prev_heading(tables, others, me)
    heading = _chain_heading(tables, prev, me, my_action)
    mine = Selection(me, my_action.location, heading)
    if not detects(tables, mine, j):
        return 0.0
    co = _co_observer_selections(tables, others, j, exclude=me)
    joint = assemble_joint(tables, j, [mine] + co)
    given = tuple(_z_label(s) for s in co)
    return mutual_information(joint, "x", _z_label(mine), given)


def potential(tables: GameTables, plan: JointPlan) -> float:
    """Global objective: sum over targets of the joint MI with all detecting
    measurements that selected that target."""
    total = 0.0
    for j in range(tables.n_targets):
        sels = _co_observer_selections(tables, plan, j, exclude=None)
        if not sels:
            continue
        joint = assemble_joint(tables, j, sels)
        zs = tuple(_z_label(s) for s in sels)
        total += mutual_information(joint, "x", zs)
    return total


def reachable_one_step(
    caps: SensorCaps, from_xy: tuple[float, float], to_xy: tuple[float, float]
) -> bool:
    """Whether ``to_xy`` is one of the 17 single-step moves from ``from_xy``."""
    dx = to_xy[0] - from_xy[0]
    dy = to_xy[1] - from_xy[1]
    tol = max(caps.move_step_distances) * 1e-6
    if math.hypot(dx, dy) <= tol:
        return True
    for d in caps.move_step_distances:
        for m in range(8):
            ang = m * math.pi / 4.0
            if math.hypot(dx - d * math.cos(ang), dy - d * math.sin(ang)) <= tol:
                return True
    return False


def plan_is_feasible(tables: GameTables, plan: JointPlan) -> bool:
    """Per-sensor location chains must be single-step reachable."""
    for i, sdef in enumerate(tables.sensors):
        prev = (sdef.pose.x, sdef.pose.y)
        for k in range(1, tables.K + 1):
            p = PlayerId(i, k)
            if p not in plan.actions:
                continue
            loc = plan.actions[p].location
            if not reachable_one_step(sdef.caps, prev, loc):
                return False
            prev = loc
    return True


def sweep_utilities(
    tables: GameTables,
    plan: JointPlan,
    player: PlayerId,
    locations: list[tuple[float, float]],
    free_heading: bool = False,
) -> np.ndarray:
    """Utilities of every (location, target) action of one player at once.

    Returns an array of shape (n_locations, n_targets). Equivalent to calling
    ``local_utility`` per action, but the conditional covariance of the target
    state given the co-observers is computed once per target and shared across
    candidate locations, which keeps a full sweep near O(1) per action.
    """
    K = tables.K
    k = player.step
    prev_theta = None if free_heading else _prev_heading(tables, plan, player)
    out = np.zeros((len(locations), tables.n_targets))
    for j in range(tables.n_targets):
        co = _co_observer_selections(tables, plan, j, exclude=player)
        Pk = tables.pred_covs[j][k - 1]
        PxK = tables.pred_covs[j][K - 1]
        # Joint over (x_k, x_K, Z_co); conditionals of x_k drive every
        # candidate's 2x2 measurement covariance.
        n = len(co)
        labels = ["xk", "xK"] + [_z_label(s) for s in co]
        dims = [4, 4] + [2] * n
        total = 8 + 2 * n
        cov = np.zeros((total, total))
        cov[:4, :4] = Pk
        cov[4:8, 4:8] = PxK
        CxkxK = Pk @ tables.trans[K - k].T
        cov[:4, 4:8] = CxkxK
        cov[4:8, :4] = CxkxK.T
        HRs = [_measurement_blocks(tables, s, j) for s in co]
        for b, (sel, (Hb, Rb)) in enumerate(zip(co, HRs)):
            l = sel.player.step
            rb = 8 + 2 * b
            Pl = tables.pred_covs[j][l - 1]
            # Cov(x_k, z_l): forward transition from the earlier step.
            if l >= k:
                Cxz = Pk @ tables.trans[l - k].T @ Hb.T
            else:
                Cxz = tables.trans[k - l] @ Pl @ Hb.T
            cov[:4, rb : rb + 2] = Cxz
            cov[rb : rb + 2, :4] = Cxz.T
            CxKz = (Hb @ Pl @ tables.trans[K - l].T).T
            cov[4:8, rb : rb + 2] = CxKz
            cov[rb : rb + 2, 4:8] = CxKz.T
            cov[rb : rb + 2, rb : rb + 2] = Hb @ Pl @ Hb.T + Rb
            for c in range(b + 1, n):
                sel_c = co[c]
                Hc, _ = HRs[c]
                m = sel_c.player.step
                rc = 8 + 2 * c
                lo, hi = (l, m) if l <= m else (m, l)
                Plo = tables.pred_covs[j][lo - 1]
                if l <= m:
                    Czz = Hb @ Plo @ tables.trans[hi - lo].T @ Hc.T
                else:
                    Czz = Hb @ (Hc @ Plo @ tables.trans[hi - lo].T).T
                cov[rb : rb + 2, rc : rc + 2] = Czz
                cov[rc : rc + 2, rb : rb + 2] = Czz.T
        joint = JointGaussian(labels=tuple(labels), dims=tuple(dims), cov=cov)
        zlabels = tuple(_z_label(s) for s in co)
        C1 = conditional_covariance(joint, "xk", zlabels)
        C2 = conditional_covariance(joint, "xk", ("xK",) + zlabels)
        target_xy = tables.predicted_xy(j, k)
        for a, loc in enumerate(locations):
            if free_heading:
                # Backward initialization evaluates k-step reachable points
                # before any heading chain exists: point straight at the target.
                heading = math.atan2(target_xy[1] - loc[1], target_xy[0] - loc[0])
            else:
                heading = _chain_heading(
                    tables, prev_theta, player, PlanAction(loc, j)
                )
            sel = Selection(player, loc, heading)
            if not detects(tables, sel, j):
                continue
            H, R = _measurement_blocks(tables, sel, j)
            S1 = H @ C1 @ H.T + R
            S2 = H @ C2 @ H.T + R
            d1 = S1[0, 0] * S1[1, 1] - S1[0, 1] * S1[1, 0]
            d2 = S2[0, 0] * S2[1, 1] - S2[0, 1] * S2[1, 0]
            if d1 <= 0.0 or d2 <= 0.0:
                out[a, j] = max(0.5 * (log_det(S1) - log_det(S2)), 0.0)
            else:
                out[a, j] = max(0.5 * (math.log(d1) - math.log(d2)), 0.0)
    return out
