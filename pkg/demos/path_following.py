"""Steering a trained policy along a moving target.

A target slides along a named path one lead-time ahead of the path clock.
Each policy step its base-frame position becomes the velocity command, so
the policy is never told about the path itself. First the commands an ideal
tracker would see, then the closed loop.

    python3 demos/path_following.py artifacts/desk/seed_0/checkpoint_final --path square
"""

import argparse
from pathlib import Path

import numpy as np

from mlpcpg.checkpoint import load_checkpoint
from mlpcpg.rollout import PATHS, TrajectorySpec, command_profile, follow, write_follow_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("checkpoint", type=Path)
    ap.add_argument("--path", choices=PATHS, default="square")
    ap.add_argument("--scale", type=float, default=2.0)
    ap.add_argument("--period", type=float, default=40.0)
    ap.add_argument("--lead", type=float, default=1.0)
    ap.add_argument("--out", type=Path, default=Path("runs/follow"))
    args = ap.parse_args()
    spec = TrajectorySpec(args.path, args.scale, args.period)

    prof = command_profile(spec, args.lead)
    print(f"ideal tracker on {spec.name}: vx in [{prof[:, 1].min():.2f}, {prof[:, 1].max():.2f}], "
          f"|yaw cmd| peaks at {np.abs(prof[:, 3]).max():.2f} rad/s")

    rows = follow(load_checkpoint(args.checkpoint), spec, args.lead)
    path = write_follow_csv(args.out / f"follow_{spec.name}.csv", rows)
    t, tx, ty, bx, by = rows[:, 1], rows[:, 2], rows[:, 3], rows[:, 4], rows[:, 5]
    gap = np.hypot(tx - bx, ty - by)
    print(f"closed loop: {len(rows)} steps, {t[-1]:.1f} s")
    for k in np.linspace(0, len(rows) - 1, 9).astype(int):
        print(f"  t={t[k]:5.1f}  target=({tx[k]:5.2f},{ty[k]:5.2f})  "
              f"base=({bx[k]:5.2f},{by[k]:5.2f})  gap={gap[k]:.2f} m")
    print(f"mean |vx - vx_cmd| = {np.mean(np.abs(rows[:, 10] - rows[:, 7])):.3f} m/s")
    print("wrote", path)


if __name__ == "__main__":
    main()
