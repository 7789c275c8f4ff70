"""Evaluation rollouts and moving-target path following."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .env import EnvConfig, Goal, QuadrupedEnv, Status
from .policy import FilterState, MlpCpgPolicy, Mode, act, assemble_observation, filter_action
from .trajlog import TrajectoryLog, TrajectoryRecorder

COMMAND_LOW = np.array([-1.0, -0.75, -1.0])
COMMAND_HIGH = np.array([4.0, 0.75, 1.0])
FOLLOW_SCHEMA_VERSION = 1


@dataclass
class Episode:
    log: TrajectoryLog
    recorder: TrajectoryRecorder
    ret: float
    status: Status


def rollout(policy: MlpCpgPolicy, goal: Goal, seconds: float = 10.0, seed: int = 0,
            env_cfg: EnvConfig | None = None, mode: Mode = Mode.DETERMINISTIC) -> Episode:
    """Run one episode with a fixed goal and record every policy step.

    The normaliser is left untouched. The time limit is ``seconds``.
    """
    env_cfg = replace(env_cfg or EnvConfig(), time_limit=seconds)
    rng = np.random.default_rng(seed)
    env = QuadrupedEnv(env_cfg)
    robot, cpg, _ = env.reset(rng)
    env.set_goal(goal)
    filt = FilterState.create()
    obs, filt = assemble_observation(robot, goal, cpg, filt, None)
    rec = TrajectoryRecorder(policy.cpg.n)
    rec.record(0.0, robot, goal, None, cpg, None)
    ret, status = 0.0, Status.CONTINUE
    while status is Status.CONTINUE:
        res = act(policy, obs, cpg, mode, rng)
        q_cmd, filt = filter_action(filt, res.command.q_hat)
        sr = env.step(q_cmd)
        cpg = res.cpg_state
        ret += sr.reward.total
        rec.record(sr.t, sr.state, goal, sr.reward, cpg, res.fb)
        status = sr.status
        obs, filt = assemble_observation(sr.state, goal, cpg, filt, None)
    return Episode(log=rec.log(), recorder=rec, ret=ret, status=status)


def frequency_by_speed(policy: MlpCpgPolicy, speeds, seconds: float = 10.0,
                       seeds=(0, 1, 2), env_cfg: EnvConfig | None = None) -> dict:
    """Mean commanded oscillator frequency for straight-ahead goals at each speed."""
    out = {}
    for v in speeds:
        fs = []
        for seed in seeds:
            ep = rollout(policy, Goal(vx=float(v)), seconds, seed, env_cfg)
            fs.append(ep.log.f[1:])
        out[float(v)] = float(np.mean(np.concatenate(fs)))
    return out


# ---------------------------------------------------------------------------
# following a moving target

def target_to_command(target_xy_base) -> np.ndarray:
    """Velocity command ``(vx, vy, yaw_rate)`` toward a target given in the base frame.

    The command points at the target and turns toward it; a target at the
    origin gives a zero command.
    """
    x, y = (float(c) for c in target_xy_base)
    if x == 0.0 and y == 0.0:
        return np.zeros(3)
    cmd = np.array([x, y, np.arctan2(y, x)])
    return np.clip(cmd, COMMAND_LOW, COMMAND_HIGH)


PATHS = ("square", "cosine", "eight", "clover", "line")


@dataclass(frozen=True)
class TrajectorySpec:
    """A named reference path of size ``scale`` (m) traversed once in ``period`` (s)."""

    name: str = "square"
    scale: float = 2.0
    period: float = 40.0

    def __post_init__(self):
        if self.name not in PATHS:
            raise ValueError(f"unknown path {self.name!r}; choose from {PATHS}")
        if not (np.isfinite(self.scale) and self.scale >= 0):
            raise ValueError("path scale must be finite and non-negative")
        if not (np.isfinite(self.period) and self.period > 0):
            raise ValueError("path period must be positive")

    @property
    def empty(self) -> bool:
        return self.scale == 0.0


CLOSED_PATHS = ("square", "eight", "clover")


def path_point(spec: TrajectorySpec, s) -> np.ndarray:
    """Point(s) of the path at progress ``s``; every path starts at the origin.

    Closed paths repeat with period 1 in ``s``; open paths stop at ``s = 1``.
    """
    s = np.asarray(s, dtype=float)
    s = np.mod(s, 1.0) if spec.name in CLOSED_PATHS else np.clip(s, 0.0, 1.0)
    L = spec.scale
    if spec.name == "square":
        k = np.minimum(np.floor(s * 4.0), 3.0)
        u = s * 4.0 - k
        corners = np.array([[0.0, 0.0], [L, 0.0], [L, L], [0.0, L], [0.0, 0.0]])
        k = k.astype(int)
        return corners[k] + (corners[k + 1] - corners[k]) * np.asarray(u)[..., None]
    if spec.name == "cosine":
        return np.stack([2.0 * L * s, 0.25 * L * (1.0 - np.cos(4.0 * np.pi * s))], -1)
    if spec.name == "eight":
        return np.stack([L * np.sin(2.0 * np.pi * s), 0.5 * L * np.sin(4.0 * np.pi * s)], -1)
    if spec.name == "clover":
        phi = 2.0 * np.pi * s
        r = L * np.sin(2.0 * phi)
        return np.stack([r * np.cos(phi), r * np.sin(phi)], -1)
    return np.stack([L * s, np.zeros_like(s)], -1)


def to_base_frame(point_xy, base_xy, yaw) -> np.ndarray:
    d = np.asarray(point_xy, dtype=float) - np.asarray(base_xy, dtype=float)
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([c * d[0] + s * d[1], -s * d[0] + c * d[1]])


def command_profile(spec: TrajectorySpec, lead: float = 1.0, dt: float = 0.04) -> np.ndarray:
    """Commands seen by a robot that tracks the path exactly, heading along its tangent.

    Rows are ``(t, vx, vy, yaw_rate)``; used to inspect a path's command content.
    """
    t = np.arange(0.0, spec.period, dt)
    rows = []
    for tk in t:
        base = path_point(spec, tk / spec.period)
        ahead = path_point(spec, (tk + dt) / spec.period)
        d = ahead - base
        yaw = np.arctan2(d[1], d[0]) if np.hypot(*d) > 1e-12 else 0.0
        target = path_point(spec, (tk + lead) / spec.period)
        rows.append([tk, *target_to_command(to_base_frame(target, base, yaw))])
    return np.array(rows).reshape(-1, 4)


FOLLOW_COLUMNS = ("schema_version", "t", "target_x", "target_y", "base_x", "base_y", "yaw",
                  "cmd_vx", "cmd_vy", "cmd_yaw", "vx", "vy", "yaw_rate")


def follow(policy: MlpCpgPolicy, spec: TrajectorySpec, lead: float = 1.0, seed: int = 0,
           env_cfg: EnvConfig | None = None) -> np.ndarray:
    """Track a target moving along ``spec``; returns rows in :data:`FOLLOW_COLUMNS` order.

    The target leads the path clock by ``lead`` seconds. Each policy step the
    target's base-frame position becomes the velocity command. An empty path
    yields an empty log.
    """
    if spec.empty:
        return np.zeros((0, len(FOLLOW_COLUMNS)))
    env_cfg = replace(env_cfg or EnvConfig(), time_limit=spec.period)
    rng = np.random.default_rng(seed)
    env = QuadrupedEnv(env_cfg)
    robot, cpg, _ = env.reset(rng)
    filt = FilterState.create()
    rows = []
    t, status = 0.0, Status.CONTINUE
    while status is Status.CONTINUE:
        target = path_point(spec, (t + lead) / spec.period)
        rel = to_base_frame(target, robot.position[:2], robot.euler[2])
        cmd = target_to_command(rel)
        goal = Goal(*cmd)
        env.set_goal(goal)
        obs, filt = assemble_observation(robot, goal, cpg, filt, None)
        res = act(policy, obs, cpg, Mode.DETERMINISTIC, rng)
        q_cmd, filt = filter_action(filt, res.command.q_hat)
        sr = env.step(q_cmd)
        robot, cpg, t, status = sr.state, res.cpg_state, sr.t, sr.status
        rows.append([FOLLOW_SCHEMA_VERSION, t, *target, *robot.position[:2], robot.euler[2],
                     *cmd, *robot.lin_vel[:2], robot.ang_vel[2]])
    return np.array(rows)


def write_follow_csv(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FOLLOW_COLUMNS)
        for row in rows:
            w.writerow([repr(float(x)) for x in row])
    return path
