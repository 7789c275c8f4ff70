"""Desk-scale training: three seeds of the adaptive-curve configuration.

Each seed runs 2e5 policy steps on the reduced-order environment and writes
its metrics log and checkpoints under ``artifacts/desk/seed_<k>``. A seed
whose ``summary.json`` matches the current training code is skipped, so the
script can be re-run after an interruption.

On one laptop core a seed takes roughly four and a half hours.

    python3 demos/desk_training.py                 # all three seeds
    python3 demos/desk_training.py --seeds 1 --steps 20000 --out /tmp/desk
"""

import argparse
import csv
import json
import logging
import time
from pathlib import Path

import numpy as np

from mlpcpg.provenance import training_source_digest
from mlpcpg.sac import SacConfig, train

ROOT = Path(__file__).resolve().parents[1]


def episode_returns(metrics_csv: Path) -> np.ndarray:
    with metrics_csv.open(newline="") as fh:
        return np.array([float(r["return"]) for r in csv.DictReader(fh)])


def summarize(seed: int, steps: int, out: Path, seconds: float) -> dict:
    ret = episode_returns(out / "metrics.csv")
    baseline = float(ret[:10].mean())
    final = float(ret[-10:].mean())
    return {"seed": seed, "steps": steps, "episodes": int(ret.size),
            "baseline_return": baseline, "final_return": final,
            "improvement": final / baseline - 1.0, "wall_seconds": seconds,
            "source_digest": training_source_digest()}


def main():
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--out", type=Path, default=ROOT / "artifacts" / "desk")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    digest = training_source_digest()
    for seed in args.seeds:
        out = args.out / f"seed_{seed}"
        done = out / "summary.json"
        if done.is_file():
            prev = json.loads(done.read_text())
            if prev["source_digest"] == digest and prev["steps"] == args.steps:
                print(f"seed {seed}: up to date, skipping")
                continue
        start = time.perf_counter()
        train(SacConfig(), seed=seed, total_steps=args.steps, out_dir=out)
        summary = summarize(seed, args.steps, out, time.perf_counter() - start)
        done.write_text(json.dumps(summary, indent=2))
        print(f"seed {seed}: baseline {summary['baseline_return']:.1f} -> "
              f"final {summary['final_return']:.1f} "
              f"({100 * summary['improvement']:+.0f}%) in {summary['wall_seconds'] / 3600:.2f} h")


if __name__ == "__main__":
    main()
