"""Randomized small problem instances for verification suites and tests."""

from __future__ import annotations

import math

import numpy as np

from .game import (
    GameTables,
    JointPlan,
    PlanAction,
    PlayerId,
    SensorDef,
    build_tables,
    resolve_plan,
)
from .models import (
    CvModel,
    RadarNoiseParams,
    SensorCaps,
    SensorPose,
    TargetState,
    candidate_locations,
)
from .tracker import TargetBelief, TrackBank

__all__ = ["random_problem", "random_instance", "random_plan", "player_locations"]


def random_problem(
    rng: np.random.Generator,
    n_sensors: int = 2,
    n_targets: int = 2,
    free_heading: bool = False,
) -> tuple[TrackBank, list[SensorDef], CvModel]:
    """A small random planning problem with sensors close enough to targets
    that detections are common. ``free_heading`` lifts the turn limit so the
    heading chain never binds."""
    beliefs = []
    for j in range(n_targets):
        pos = rng.uniform(150.0, 450.0, size=2)
        vel = rng.uniform(-6.0, 6.0, size=2)
        cov = np.diag(rng.uniform([40.0, 40.0, 2.0, 2.0], [160.0, 160.0, 9.0, 9.0]))
        beliefs.append(TargetBelief(TargetState(*pos, *vel), cov, target_id=j))
    bank = TrackBank(beliefs)
    model = CvModel(dt=1.0, q=float(rng.uniform(0.05, 0.5)))
    sensors = []
    for i in range(n_sensors):
        pos = rng.uniform(100.0, 500.0, size=2)
        z = 350.0 + 40.0 * i
        theta = float(rng.uniform(-math.pi, math.pi))
        caps = SensorCaps(
            move_step_distances=(30.0, 60.0),
            max_turn=math.pi if free_heading else math.pi / 3,
            fov_half_angle=float(rng.uniform(0.6, 1.2)),
            range_min=0.1,
            range_max=1500.0,
        )
        sensors.append(
            SensorDef(SensorPose(*pos, z, theta), caps, RadarNoiseParams())
        )
    return bank, sensors, model


def random_instance(
    rng: np.random.Generator,
    n_sensors: int = 2,
    K: int = 2,
    n_targets: int = 2,
    free_heading: bool = False,
) -> GameTables:
    """Precomputed game tables for a :func:`random_problem`."""
    bank, sensors, model = random_problem(rng, n_sensors, n_targets, free_heading)
    return build_tables(bank, sensors, model, K)


def player_locations(
    tables: GameTables, plan_actions: dict[PlayerId, PlanAction], player: PlayerId
) -> list[tuple[float, float]]:
    """Single-step candidate set from the player's predecessor location."""
    sdef = tables.sensors[player.sensor]
    if player.step == 1:
        prev = (sdef.pose.x, sdef.pose.y)
    else:
        prev = plan_actions[PlayerId(player.sensor, player.step - 1)].location
    return candidate_locations(prev, sdef.caps, 1)


def random_plan(tables: GameTables, rng: np.random.Generator) -> JointPlan:
    """A random kinematically feasible joint plan."""
    actions: dict[PlayerId, PlanAction] = {}
    for i, sdef in enumerate(tables.sensors):
        prev = (sdef.pose.x, sdef.pose.y)
        for k in range(1, tables.K + 1):
            locs = candidate_locations(prev, sdef.caps, 1)
            loc = locs[int(rng.integers(len(locs)))]
            actions[PlayerId(i, k)] = PlanAction(
                loc, int(rng.integers(tables.n_targets))
            )
            prev = loc
    return resolve_plan(tables, actions)
