"""Trajectory log: one CSV row per policy step, with a versioned column manifest.

Column groups, in order (``N`` joints, four feet)::

    schema_version, t
    pos_{x,y,z}, roll, pitch, yaw, vel_{x,y,z} (heading frame), rate_{x,y,z}
    goal_{vx,vy,yaw}
    q_{0..N-1}, qd_{0..N-1}, tau_{0..N-1}
    foot_{FL,FR,RL,RR}_{x,y,z}, contact_{FL,FR,RL,RR}
    reward_<term> for every reward term, reward_total
    r_{0..N-1}, theta_{0..N-1}, f, kappa_*, xi_*, chi_*
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cpg import LEG_NAMES, N_JOINTS
from .reward import REWARD_TERMS

TRAJECTORY_SCHEMA_VERSION = 1


def trajectory_columns(n: int = N_JOINTS) -> tuple:
    j = range(n)
    cols = ["schema_version", "t", "pos_x", "pos_y", "pos_z", "roll", "pitch", "yaw",
            "vel_x", "vel_y", "vel_z", "rate_x", "rate_y", "rate_z",
            "goal_vx", "goal_vy", "goal_yaw"]
    cols += [f"q_{k}" for k in j] + [f"qd_{k}" for k in j] + [f"tau_{k}" for k in j]
    cols += [f"foot_{leg}_{a}" for leg in LEG_NAMES for a in "xyz"]
    cols += [f"contact_{leg}" for leg in LEG_NAMES]
    cols += [f"reward_{name}" for name in REWARD_TERMS] + ["reward_total"]
    cols += [f"r_{k}" for k in j] + [f"theta_{k}" for k in j] + ["f"]
    for name in ("kappa", "xi", "chi"):
        cols += [f"{name}_{k}" for k in j]
    return tuple(cols)


@dataclass
class TrajectoryLog:
    """Column arrays of a trajectory; ``T`` rows."""

    t: np.ndarray
    position: np.ndarray        # (T, 3)
    euler: np.ndarray           # (T, 3)
    lin_vel: np.ndarray         # (T, 3)
    ang_vel: np.ndarray         # (T, 3)
    goal: np.ndarray            # (T, 3)
    q: np.ndarray               # (T, N)
    qd: np.ndarray
    tau: np.ndarray
    feet: np.ndarray            # (T, 4, 3)
    contacts: np.ndarray        # (T, 4) bool
    rewards: dict = field(default_factory=dict)
    reward_total: np.ndarray | None = None
    cpg_r: np.ndarray | None = None
    cpg_theta: np.ndarray | None = None
    f: np.ndarray | None = None
    kappa: np.ndarray | None = None
    xi: np.ndarray | None = None
    chi: np.ndarray | None = None

    def __len__(self) -> int:
        return self.t.shape[0]


class TrajectoryRecorder:
    """Accumulates rows during a rollout; :meth:`log` returns the arrays."""

    def __init__(self, n: int = N_JOINTS):
        self.n = n
        self.columns = trajectory_columns(n)
        self.rows: list[np.ndarray] = []

    def record(self, t, robot, goal, reward=None, cpg_state=None, fb=None) -> None:
        n = self.n
        nan = np.full(n, np.nan)
        terms = reward.terms if reward is not None else {}
        row = np.concatenate([
            [TRAJECTORY_SCHEMA_VERSION, t], robot.position, robot.euler, robot.lin_vel,
            robot.ang_vel, np.asarray(goal.as_array() if hasattr(goal, "as_array") else goal),
            robot.q, robot.qd, robot.tau, np.ravel(robot.feet_pos),
            np.asarray(robot.contacts, dtype=float),
            [terms.get(name, np.nan) for name in REWARD_TERMS],
            [reward.total if reward is not None else np.nan],
            cpg_state.r if cpg_state is not None else nan,
            cpg_state.theta if cpg_state is not None else nan,
            [float(fb.f) if fb is not None else np.nan],
            np.broadcast_to(fb.kappa, (n,)) if fb is not None else nan,
            np.broadcast_to(fb.xi, (n,)) if fb is not None else nan,
            np.broadcast_to(fb.chi, (n,)) if fb is not None else nan,
        ]).astype(float)
        self.rows.append(row)

    def table(self) -> np.ndarray:
        return np.array(self.rows).reshape(len(self.rows), len(self.columns))

    def log(self) -> TrajectoryLog:
        return from_table(self.table(), self.n)

    def write(self, path) -> Path:
        return write_table(path, self.table(), self.columns)


def from_table(table: np.ndarray, n: int = N_JOINTS) -> TrajectoryLog:
    cols = {c: k for k, c in enumerate(trajectory_columns(n))}

    def take(*names):
        return table[:, [cols[c] for c in names]]

    def group(prefix):
        return take(*[f"{prefix}_{k}" for k in range(n)])

    feet = take(*[f"foot_{leg}_{a}" for leg in LEG_NAMES for a in "xyz"]).reshape(-1, 4, 3)
    return TrajectoryLog(
        t=table[:, cols["t"]],
        position=take("pos_x", "pos_y", "pos_z"),
        euler=take("roll", "pitch", "yaw"),
        lin_vel=take("vel_x", "vel_y", "vel_z"),
        ang_vel=take("rate_x", "rate_y", "rate_z"),
        goal=take("goal_vx", "goal_vy", "goal_yaw"),
        q=group("q"), qd=group("qd"), tau=group("tau"),
        feet=feet,
        contacts=take(*[f"contact_{leg}" for leg in LEG_NAMES]) > 0.5,
        rewards={name: table[:, cols[f"reward_{name}"]] for name in REWARD_TERMS},
        reward_total=table[:, cols["reward_total"]],
        cpg_r=group("r"), cpg_theta=group("theta"), f=table[:, cols["f"]],
        kappa=group("kappa"), xi=group("xi"), chi=group("chi"),
    )


def write_table(path, table: np.ndarray, columns) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in table:
            w.writerow([repr(float(x)) for x in row])
    return path


def read_trajectory_csv(path) -> TrajectoryLog:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in r] for r in reader]
    n = sum(1 for c in header if c.startswith("q_"))
    expected = trajectory_columns(n)
    if tuple(header) != expected:
        missing = sorted(set(expected) - set(header))
        raise ValueError(f"{path}: not a trajectory log (missing columns {missing[:5]})")
    table = np.array(rows, dtype=float).reshape(len(rows), len(header))
    if table.size and np.any(table[:, 0] != TRAJECTORY_SCHEMA_VERSION):
        raise ValueError(f"{path}: unsupported schema version")
    return from_table(table, n)
