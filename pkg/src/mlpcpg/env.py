"""Reduced-order quadruped environment.

The joints are independent damped inertias driven by PD torques. The body
has no contact forces: every stance foot is assumed not to slip, so the base
moves opposite to the mean stance-foot velocity. It falls ballistically when
no foot reaches the ground. Roll and pitch relax with a first-order lag
toward the attitude set by the support centroid, which is level whenever the
centroid lies under the body centre. This is enough to exercise the
observation, reward, termination and initialisation protocol. It is not a
rigid-body simulator.

A different backend can stand in for :class:`ReducedOrderBackend` by
providing ``initial_state``, ``substep`` and ``advance``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import kinematics as kin
from ._dynamics import simulate
from .control import (PD_TICKS_PER_POLICY_TICK, Q_MAX, Q_MIN, TORQUE_LIMIT, VELOCITY_LIMIT,
                      PdConfig, squash_to_limits)
from .cpg import LEG_OFFSET, N_JOINTS, CpgState, tile_legs
from .reward import RewardBreakdown, compute_reward

GRAVITY = 9.81


class Status(str, enum.Enum):
    CONTINUE = "continue"
    FAIL = "fail"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class Goal:
    vx: float = 0.0
    vy: float = 0.0
    yaw_rate: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.yaw_rate])

    @property
    def speed(self) -> float:
        return float(np.hypot(self.vx, self.vy))


@dataclass(frozen=True)
class EnvConfig:
    upper_leg: float = kin.UPPER_LEG
    lower_leg: float = kin.LOWER_LEG
    body_size: tuple = (kin.BODY_LENGTH, kin.BODY_WIDTH, kin.BODY_HEIGHT)
    mass: float = kin.BODY_MASS
    desired_base_height: float = 0.50
    desired_foot_height: float = 0.075
    time_limit: float = 10.0
    tilt_limit_deg: float = 30.0
    command_vx: tuple = (-1.0, 5.0)
    command_vy: tuple = (-1.0, 1.0)
    command_yaw: tuple = (-np.pi / 2, np.pi / 2)
    init_vx: tuple = (-1.0, 5.0)
    init_vy: tuple = (-1.0, 1.0)
    init_yaw_rate: tuple = (-np.pi, np.pi)
    init_q_std: float = np.pi / 4
    init_r: tuple = (0.0, np.pi / 4)
    joint_inertia: float = 0.05
    joint_damping: float = 0.5
    attitude_tau: float = 0.2
    contact_tol: float = 1e-3
    self_collision_distance: float = 0.06
    physics_dt: float = 0.001
    policy_dt: float = 0.04
    seed: int = 0

    def __post_init__(self):
        if min(self.upper_leg, self.lower_leg, self.mass, *self.body_size) <= 0:
            raise ValueError("robot geometry must be positive")
        if self.time_limit <= 0:
            raise ValueError("time limit must be positive")

    @property
    def substeps(self) -> int:
        return int(round(self.policy_dt / self.physics_dt))


@dataclass(frozen=True)
class RobotState:
    """Snapshot of the robot; velocities are expressed in the heading frame
    (world frame rotated by yaw) unless the name says otherwise."""

    position: np.ndarray          # base, world (x, y, height)
    euler: np.ndarray             # roll, pitch, yaw
    quaternion: np.ndarray        # (w, x, y, z)
    lin_vel: np.ndarray           # heading frame
    ang_vel: np.ndarray           # roll, pitch, yaw rates
    gravity: np.ndarray           # gravity direction in the body frame
    q: np.ndarray
    qd: np.ndarray
    tau: np.ndarray
    feet_pos: np.ndarray          # (4, 3) world
    feet_vel: np.ndarray          # (4, 3) world
    hips_pos: np.ndarray          # (4, 3) world
    contacts: np.ndarray          # (4,) bool
    body_contact: bool = False
    self_collision: bool = False

    @property
    def base_height(self) -> float:
        return float(self.position[2])

    @property
    def world_lin_vel(self) -> np.ndarray:
        yaw = self.euler[2]
        c, s = np.cos(yaw), np.sin(yaw)
        v = self.lin_vel
        return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])


def nominal_joint_angles() -> np.ndarray:
    """Standing posture: the oscillator setpoints pushed through the action squashing."""
    return squash_to_limits(np.tanh(tile_legs(LEG_OFFSET)))


def _heading_velocity(v_world, yaw):
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([c * v_world[0] + s * v_world[1], -s * v_world[0] + c * v_world[1],
                     v_world[2]])


def _assemble(cfg: EnvConfig, base_xy, height, euler, v_world, ang_vel, q, qd, tau,
              contacts, v_rel_body=None) -> RobotState:
    rot = kin.rotation_matrix(*euler)
    position = np.array([base_xy[0], base_xy[1], height])
    feet_body = kin.feet_in_body(q)
    rel_world = feet_body @ rot.T
    feet_pos = position + rel_world
    hips_pos = position + kin.HIP_OFFSETS @ rot.T
    if v_rel_body is None:
        v_rel_body = kin.feet_velocity_in_body(q, qd)
    omega_world = np.array([0.0, 0.0, ang_vel[2]]) + rot @ np.array([ang_vel[0], ang_vel[1], 0.0])
    feet_vel = v_world + np.cross(omega_world, rel_world) + v_rel_body @ rot.T
    corners_z = height + (kin.BODY_CORNERS @ rot.T)[:, 2]
    front_gap = np.linalg.norm(feet_pos[0, :2] - feet_pos[1, :2])
    rear_gap = np.linalg.norm(feet_pos[2, :2] - feet_pos[3, :2])
    return RobotState(
        position=position,
        euler=np.array(euler, dtype=float),
        quaternion=kin.quaternion_from_euler(*euler),
        lin_vel=_heading_velocity(v_world, euler[2]),
        ang_vel=np.array(ang_vel, dtype=float),
        gravity=kin.gravity_in_body(rot),
        q=q, qd=qd, tau=tau,
        feet_pos=feet_pos, feet_vel=feet_vel, hips_pos=hips_pos,
        contacts=np.asarray(contacts, dtype=bool),
        body_contact=bool(np.any(corners_z <= 0.0)),
        self_collision=bool(min(front_gap, rear_gap) < cfg.self_collision_distance),
    )


class ReducedOrderBackend:
    """Joint inertias plus a no-slip stance model for the body."""

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg

    def initial_state(self, q, qd, v_heading, yaw_rate) -> RobotState:
        """Place the robot so its lowest foot touches the ground."""
        q = np.clip(np.asarray(q, dtype=float), Q_MIN, Q_MAX)
        depth = -kin.feet_in_body(q)[:, 2]
        height = float(depth.max())
        contacts = depth >= height - self.cfg.contact_tol
        v_world = np.asarray(v_heading, dtype=float)
        return _assemble(self.cfg, (0.0, 0.0), height, (0.0, 0.0, 0.0), v_world,
                         (0.0, 0.0, float(yaw_rate)), q, np.asarray(qd, dtype=float),
                         np.zeros(N_JOINTS), contacts)

    def substep(self, state: RobotState, tau, dt: float | None = None) -> RobotState:
        """One physics tick with a fixed torque."""
        tau = np.asarray(tau, dtype=float)
        if not np.all(np.isfinite(tau)):
            raise ValueError("non-finite joint torque")
        return self._run(state, tau.copy(), None, None, 1, dt)

    def advance(self, state: RobotState, q_hat, pd: PdConfig, ticks: int) -> tuple:
        """Hold ``q_hat`` under PD control for ``ticks`` physics ticks.

        Returns the new state and the number of ticks actually executed.
        """
        q_hat = np.asarray(q_hat, dtype=float)
        if not np.all(np.isfinite(q_hat)):
            raise ValueError("non-finite joint target")
        counter = []
        new = self._run(state, np.zeros(N_JOINTS), q_hat, pd, ticks, None, counter)
        return new, counter[0]

    def _run(self, state, tau, q_hat, pd, ticks, dt, counter=None) -> RobotState:
        cfg = self.cfg
        dt = cfg.physics_dt if dt is None else dt
        q, qd = state.q.copy(), state.qd.copy()
        euler, pos = state.euler.copy(), state.position.copy()
        v_world, ang_vel = state.world_lin_vel, state.ang_vel.copy()
        contacts = state.contacts.copy()
        use_pd = pd is not None
        done = simulate(
            q, qd, euler, pos, v_world, ang_vel, contacts, tau,
            q_hat if use_pd else tau, use_pd,
            pd.kp if use_pd else 0.0, pd.kd if use_pd else 0.0,
            pd.torque_limit if use_pd else TORQUE_LIMIT,
            Q_MIN, Q_MAX, VELOCITY_LIMIT, cfg.joint_inertia, cfg.joint_damping,
            cfg.attitude_tau, cfg.contact_tol, dt, ticks,
            kin.HIP_OFFSETS, cfg.upper_leg, cfg.lower_leg, GRAVITY)
        if counter is not None:
            counter.append(done)
        return _assemble(cfg, pos[:2], pos[2], euler, v_world, ang_vel, q, qd, tau, contacts)


def env_step(state: RobotState, torques, dt: float = 0.001,
             cfg: EnvConfig | None = None) -> RobotState:
    """One physics tick of the reduced-order backend."""
    cfg = cfg or EnvConfig()
    return ReducedOrderBackend(cfg).substep(state, torques, dt)


def reset(cfg: EnvConfig, rng: np.random.Generator, backend=None):
    """Sample an initial robot state, oscillator state and velocity goal."""
    backend = backend or ReducedOrderBackend(cfg)
    v0 = np.array([rng.uniform(*cfg.init_vx), rng.uniform(*cfg.init_vy), 0.0])
    yaw_rate0 = rng.uniform(*cfg.init_yaw_rate)
    q0 = np.clip(rng.normal(nominal_joint_angles(), cfg.init_q_std), Q_MIN, Q_MAX)
    robot = backend.initial_state(q0, np.zeros(N_JOINTS), v0, yaw_rate0)
    cpg = CpgState(theta=rng.uniform(0.0, 2 * np.pi, N_JOINTS),
                   r=rng.uniform(*cfg.init_r, N_JOINTS))
    goal = Goal(vx=rng.uniform(*cfg.command_vx), vy=rng.uniform(*cfg.command_vy),
                yaw_rate=rng.uniform(*cfg.command_yaw))
    return robot, cpg, goal


def check_termination(state: RobotState, t: float, cfg: EnvConfig | None = None) -> Status:
    cfg = cfg or EnvConfig()
    if state.body_contact or kin.tilt_angle(state.gravity) > np.deg2rad(cfg.tilt_limit_deg):
        return Status.FAIL
    # small slack so that accumulated float time still hits the limit on the last step
    if t >= cfg.time_limit - 1e-9:
        return Status.TIMEOUT
    return Status.CONTINUE


@dataclass
class StepResult:
    state: RobotState
    reward: RewardBreakdown
    status: Status
    t: float


@dataclass
class QuadrupedEnv:
    """Policy-rate wrapper: holds a joint target for 40 PD ticks per step."""

    cfg: EnvConfig = field(default_factory=EnvConfig)
    pd: PdConfig = field(default_factory=PdConfig)
    backend: object = None

    def __post_init__(self):
        if self.backend is None:
            self.backend = ReducedOrderBackend(self.cfg)
        self.state: RobotState | None = None
        self.goal = Goal()
        self.t = 0.0
        self.steps = 0

    def reset(self, rng: np.random.Generator):
        self.state, cpg, self.goal = reset(self.cfg, rng, self.backend)
        self.t = 0.0
        self.steps = 0
        return self.state, cpg, self.goal

    def set_goal(self, goal: Goal) -> None:
        self.goal = goal

    def step(self, q_hat) -> StepResult:
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        state, ticks = self.backend.advance(self.state, q_hat, self.pd, self.cfg.substeps)
        assert ticks == PD_TICKS_PER_POLICY_TICK, "PD clock must tick 40 times per policy tick"
        self.state = state
        self.steps += 1
        self.t = self.steps * self.cfg.policy_dt
        reward = compute_reward(state, self.goal, self.cfg)
        return StepResult(state, reward, check_termination(state, self.t, self.cfg), self.t)
