"""Myopic vs open-loop vs open-loop-feedback RMSE comparison.

Runs the bundled survey scenario (three sensors, five targets of which two
are weaving Dubins vehicles) under all three planning modes on shared seeds
and prints per-step RMSE by target kind, plus the final-third summary used
in the acceptance gate. Writes the joined CSV next to the script if --out
is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import time

import numpy as np

import sensorgame
from sensorgame.config import load_config
from sensorgame.sim import emit_results, run_monte_carlo

MODES = ("myopic", "ol", "olf")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="write joined CSV here")
    args = ap.parse_args()

    cfg = load_config(sensorgame.__path__[0] + "/scenarios/survey.toml")
    aggs = {}
    for mode in MODES:
        mcfg = dataclasses.replace(
            cfg, planning=dataclasses.replace(cfg.planning, mode=mode)
        )
        t0 = time.time()
        aggs[mode] = run_monte_carlo(mcfg, args.runs, args.seed)
        print(f"{mode}: {args.runs} runs in {time.time() - t0:.0f}s")

    cv = [i for i, t in enumerate(cfg.targets) if t.kind == "cv"]
    db = [i for i, t in enumerate(cfg.targets) if t.kind == "dubins"]
    steps = cfg.run.num_steps
    print(f"\nper-step mean RMSE (cv targets / dubins targets)")
    print("step  " + "  ".join(f"{m:>13}" for m in MODES))
    for k in range(steps):
        row = []
        for m in MODES:
            e = aggs[m].errors[:, k, :]
            row.append(f"{e[:, cv].mean():6.1f}/{e[:, db].mean():6.1f}")
        print(f"{k + 1:4d}  " + "  ".join(row))

    final = slice(2 * steps // 3, steps)
    print("\nfinal-third means:")
    for name, idx in (("cv", cv), ("dubins", db)):
        vals = {m: aggs[m].errors[:, final, :][:, :, idx].mean() for m in MODES}
        print(f"  {name}: " + "  ".join(f"{m}={vals[m]:.2f}" for m in MODES))

    if args.out:
        emit_results(list(aggs.values()), "csv", args.out)
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
