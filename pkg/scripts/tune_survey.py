"""Parameter exploration for the survey scenario orderings.

Runs myopic/ol/olf on variants of the bundled survey scenario and prints the
final-third RMSE means with paired standard errors, split by target kind.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

import numpy as np

import sensorgame
from sensorgame.config import load_config
from sensorgame.sim import run_monte_carlo


def final_third(agg, idx):
    steps = agg.num_steps
    return agg.errors[:, 2 * steps // 3 :, :][:, :, idx].mean(axis=(1, 2))


def report(cfg, runs, seed):
    aggs = {}
    for mode in ("myopic", "ol", "olf"):
        mcfg = dataclasses.replace(
            cfg, planning=dataclasses.replace(cfg.planning, mode=mode)
        )
        t = time.time()
        aggs[mode] = run_monte_carlo(mcfg, runs, seed)
        print(f"  {mode}: {time.time() - t:.0f}s", flush=True)
    cv = [i for i, t in enumerate(cfg.targets) if t.kind == "cv"]
    db = [i for i, t in enumerate(cfg.targets) if t.kind == "dubins"]
    for name, idx in (("cv", cv), ("dubins", db)):
        per_run = {m: final_third(aggs[m], idx) for m in aggs}
        means = {m: v.mean() for m, v in per_run.items()}
        print(f"  {name}: " + " ".join(f"{m}={means[m]:.2f}" for m in means))
        checks = (
            [("olf<=ol", "ol", "olf"), ("ol<=my", "myopic", "ol")]
            if name == "cv"
            else [("ol>=my", "ol", "myopic"), ("olf<=my", "myopic", "olf")]
        )
        for label, hi, lo in checks:
            d = per_run[hi] - per_run[lo]
            se = d.std(ddof=1) / np.sqrt(len(d))
            print(f"    {label}: diff={d.mean():.2f} se={se:.2f} "
                  f"ok={d.mean() > se}")
    return aggs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=None)
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--set", action="append", default=[],
                    help="e.g. caps.fov_half_angle=1.0, dubins.speed=9")
    args = ap.parse_args()

    path = args.config or sensorgame.__path__[0] + "/scenarios/survey.toml"
    cfg = load_config(path)
    for kv in args.set:
        key, val = kv.split("=")
        val = float(val)
        if key.startswith("caps."):
            f = key.split(".", 1)[1]
            cfg = dataclasses.replace(
                cfg,
                sensors=tuple(
                    dataclasses.replace(
                        s, caps=dataclasses.replace(s.caps, **{f: val})
                    )
                    for s in cfg.sensors
                ),
            )
        elif key.startswith("cv."):
            f = key.split(".", 1)[1]
            cfg = dataclasses.replace(
                cfg,
                targets=tuple(
                    dataclasses.replace(t, **{f: val}) if t.kind == "cv" else t
                    for t in cfg.targets
                ),
            )
        elif key.startswith("dubins."):
            f = key.split(".", 1)[1]
            cfg = dataclasses.replace(
                cfg,
                targets=tuple(
                    dataclasses.replace(t, **{f: val}) if t.kind == "dubins" else t
                    for t in cfg.targets
                ),
            )
        elif key.startswith("run."):
            f = key.split(".", 1)[1]
            cfg = dataclasses.replace(
                cfg, run=dataclasses.replace(cfg.run, **{f: int(val)})
            )
        elif key.startswith("planning."):
            f = key.split(".", 1)[1]
            cast = float if f in ("alpha", "beta") else int
            cfg = dataclasses.replace(
                cfg, planning=dataclasses.replace(cfg.planning, **{f: cast(val)})
            )
        elif key.startswith("model."):
            f = key.split(".", 1)[1]
            cfg = dataclasses.replace(
                cfg, model=dataclasses.replace(cfg.model, **{f: val})
            )
        else:
            sys.exit(f"unknown key: {key}")
        print(f"override {key} = {val}")
    report(cfg, args.runs, args.seed)


if __name__ == "__main__":
    main()
