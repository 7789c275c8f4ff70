"""From a trained checkpoint to gait figures.

Rolls the policy out at a few forward speeds, then reports step frequency
against the reference curve, step length, cost of transport and duty factors.
Figure tables land next to the trajectories as CSV.

    python3 demos/gait_report.py artifacts/desk/seed_0/checkpoint_final
"""

import argparse
from pathlib import Path

import numpy as np

from mlpcpg.checkpoint import load_checkpoint
from mlpcpg.env import Goal
from mlpcpg.gait import analyze, f_ref, write_figure_data
from mlpcpg.rollout import rollout


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("checkpoint", type=Path)
    ap.add_argument("--speeds", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    ap.add_argument("--seconds", type=float, default=10.0)
    ap.add_argument("--out", type=Path, default=Path("runs/gait_report"))
    args = ap.parse_args()

    policy = load_checkpoint(args.checkpoint)
    runs = {}
    print(f"{'v_cmd':>6} {'v_meas':>7} {'f_cpg':>6} {'f_ref':>6} {'f_step':>6} "
          f"{'L_step':>6} {'CoT':>6}  duty FL/FR/RL/RR")
    for v in args.speeds:
        ep = rollout(policy, Goal(vx=v), args.seconds, seed=0)
        ep.recorder.write(args.out / f"trajectory_v{v:.2f}.csv")
        log = ep.log
        m = analyze(log)
        runs[f"v{v:.2f}"] = m
        v_meas = float(np.mean(log.lin_vel[1:, 0]))
        cot = f"{m.cot:6.3f}"
        duty = "/".join(f"{d:.2f}" for d in m.duty_factors)
        print(f"{v:6.2f} {v_meas:7.2f} {np.mean(log.f[1:]):6.2f} {f_ref(v):6.2f} "
              f"{m.mean_frequency:6.2f} {m.mean_step_length:6.2f} {cot}  {duty}  "
              f"({ep.status.value})")
    for p in write_figure_data(args.out / "figures", runs):
        print("wrote", p)


if __name__ == "__main__":
    main()
