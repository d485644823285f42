"""Command-line interface.

Subcommands:

- ``run``      one seeded scenario, metrics to stdout or --out
- ``mc``       Monte Carlo batch for the configured mode
- ``compare``  myopic / ol / olf on shared seeds, joined table
- ``verify``   built-in invariant suites (alignment, decomposition, Nash)

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .config import ConfigError, load_config
from .sim import emit_results, render_csv, render_json, run_monte_carlo

__all__ = ["main", "cli_main"]


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sensorgame",
        description="Game-theoretic non-myopic sensor trajectory planning simulator.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, runs=False):
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--k", type=int, default=None, help="override planning.k")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if runs:
            p.add_argument(
                "--runs", type=int, default=None, help="override run.num_mc_runs"
            )
            p.add_argument("--jobs", type=int, default=1, help="parallel workers")

    p_run = sub.add_parser("run", help="single scenario run")
    common(p_run)
    p_run.add_argument(
        "--mode", choices=("myopic", "ol", "olf"), default=None,
        help="override planning.mode",
    )

    p_mc = sub.add_parser("mc", help="Monte Carlo batch")
    common(p_mc, runs=True)
    p_mc.add_argument(
        "--mode", choices=("myopic", "ol", "olf"), default=None,
        help="override planning.mode",
    )

    p_cmp = sub.add_parser("compare", help="myopic vs ol vs olf on shared seeds")
    common(p_cmp, runs=True)

    p_ver = sub.add_parser("verify", help="run built-in invariant checks")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument(
        "--instances", type=int, default=50, help="instances per suite"
    )
    return ap


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, run=replace(cfg.run, seed=args.seed))
    if getattr(args, "runs", None) is not None:
        cfg = replace(cfg, run=replace(cfg.run, num_mc_runs=args.runs))
    if getattr(args, "k", None) is not None:
        cfg = replace(cfg, planning=replace(cfg.planning, k=args.k))
    if getattr(args, "mode", None) is not None:
        cfg = replace(cfg, planning=replace(cfg.planning, mode=args.mode))
    if cfg.planning.k < 1:
        raise ConfigError("planning.k: must be >= 1")
    return cfg


def _emit(aggregates, args) -> None:
    if args.out:
        emit_results(aggregates, args.format, args.out)
    else:
        text = render_csv(aggregates) if args.format == "csv" else render_json(aggregates)
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    agg = run_monte_carlo(cfg, 1, cfg.run.seed, jobs=1)
    _emit([agg], args)
    return 0


def _cmd_mc(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    agg = run_monte_carlo(cfg, cfg.run.num_mc_runs, cfg.run.seed, jobs=args.jobs)
    _emit([agg], args)
    return 0


def _cmd_compare(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    aggregates = []
    for mode in ("myopic", "ol", "olf"):
        mcfg = replace(cfg, planning=replace(cfg.planning, mode=mode))
        aggregates.append(
            run_monte_carlo(mcfg, cfg.run.num_mc_runs, cfg.run.seed, jobs=args.jobs)
        )
    _emit(aggregates, args)
    return 0


def _cmd_verify(args) -> int:
    from .game import PlanAction, deviate, local_utility, potential
    from .gaussian_info import mutual_information
    from .instances import player_locations, random_instance, random_plan
    from .planner import LearnerParams, plan_nonmyopic
    from .instances import random_problem

    rng = np.random.default_rng(args.seed)
    n = args.instances
    failures = []

    # potential alignment: utility change equals potential change
    worst = 0.0
    for _ in range(n):
        tables = random_instance(
            rng,
            n_sensors=int(rng.integers(1, 4)),
            K=int(rng.integers(1, 4)),
            n_targets=int(rng.integers(1, 4)),
        )
        plan = random_plan(tables, rng)
        players = sorted(plan.actions)
        p = players[int(rng.integers(len(players)))]
        locs = player_locations(tables, plan.actions, p)
        action = PlanAction(
            locs[int(rng.integers(len(locs)))], int(rng.integers(tables.n_targets))
        )
        du = local_utility(tables, p, action, plan) - local_utility(
            tables, p, plan.actions[p], plan
        )
        dphi = potential(tables, deviate(tables, plan, p, action)) - potential(
            tables, plan
        )
        worst = max(worst, abs(du - dphi))
    ok = worst < 1e-8
    print(f"alignment: max |du - dphi| = {worst:.3e} over {n} instances "
          f"[{'ok' if ok else 'FAIL'}]")
    if not ok:
        failures.append("alignment")

    # per-target decomposition: potential equals the undecomposed joint MI
    from .game import _co_observer_selections, _z_label, assemble_joint

    worst = 0.0
    for _ in range(n):
        tables = random_instance(rng)
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
    print(f"decomposition: max deviation = {worst:.3e} over {n} instances "
          f"[{'ok' if ok else 'FAIL'}]")
    if not ok:
        failures.append("decomposition")

    # Nash certificate on converged small instances
    from .game import PlayerId, build_tables, reachable_one_step
    from .instances import random_problem

    checked = bad = 0
    for trial in range(max(n // 5, 5)):
        bank, sensors, model = random_problem(rng, n_sensors=2, n_targets=2,
                                              free_heading=True)
        res = plan_nonmyopic(bank, sensors, model, 2,
                             LearnerParams(rng_seed=trial))
        if not res.converged:
            continue
        checked += 1
        tables = build_tables(bank, sensors, model, 2)
        base = potential(tables, res.plan)
        for p in sorted(res.plan.actions):
            caps = tables.sensors[p.sensor].caps
            nxt = res.plan.actions.get(PlayerId(p.sensor, p.step + 1))
            for loc in player_locations(tables, res.plan.actions, p):
                if nxt is not None and not reachable_one_step(caps, loc, nxt.location):
                    continue
                for j in range(tables.n_targets):
                    cand = deviate(tables, res.plan, p, PlanAction(loc, j))
                    if potential(tables, cand) > base + 1e-8:
                        bad += 1
    ok = checked > 0 and bad == 0
    print(f"nash: {checked} converged plans, {bad} improving deviations "
          f"[{'ok' if ok else 'FAIL'}]")
    if not ok:
        failures.append("nash")

    return 0 if not failures else 2


def cli_main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "mc":
            return _cmd_mc(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_verify(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
