"""The composite MLP-CPG policy: observation assembly, acting, and filtering.

One policy tick is::

    obs -> feedback MLP -> (f, kappa, xi, chi, sigma)
        -> oscillator step -> psi (+ sigma * noise) -> tanh -> joint range
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .control import (POLICY_HZ, Q_MAX, Q_MIN, PdConfig, pd_torque,  # noqa: F401
                      squash_to_limits)
from .cpg import (N_JOINTS, CpgParams, CpgState, FeedbackSignals, cpg_step,
                  default_params, wrap_phase)
from .filters import LowPassState, lowpass_step
from .mlp import MlpParams, init_mlp, mlp_forward

OBS_CUTOFF_HZ = 10.0
ACTION_CUTOFF_HZ = 5.0
LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class Mode(str, enum.Enum):
    STOCHASTIC = "stochastic"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class ObsLayout:
    """Index ranges of the flat observation vector for ``n`` joints."""

    n: int = N_JOINTS

    @property
    def dim(self) -> int:
        return 9 + 2 * self.n + 3 + 2 * self.n

    @property
    def robot(self) -> slice:
        return slice(0, 9 + 2 * self.n)

    @property
    def goal(self) -> slice:
        return slice(9 + 2 * self.n, 12 + 2 * self.n)

    @property
    def r(self) -> slice:
        return slice(12 + 2 * self.n, 12 + 3 * self.n)

    @property
    def theta(self) -> slice:
        return slice(12 + 3 * self.n, 12 + 4 * self.n)


@dataclass(frozen=True)
class Observation:
    lin_vel: np.ndarray
    ang_vel: np.ndarray
    gravity: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    goal: np.ndarray
    r: np.ndarray
    theta: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.lin_vel, self.ang_vel, self.gravity, self.q, self.qd,
                               self.goal, self.r, self.theta])


@dataclass(frozen=True)
class JointCommand:
    q_hat: np.ndarray


@dataclass(frozen=True)
class FilterState:
    obs: LowPassState
    action: LowPassState

    @classmethod
    def create(cls, fs: float = POLICY_HZ) -> "FilterState":
        return cls(obs=LowPassState.design(OBS_CUTOFF_HZ, fs),
                   action=LowPassState.design(ACTION_CUTOFF_HZ, fs))

    def reset(self) -> "FilterState":
        return FilterState(self.obs.reset(), self.action.reset())


@dataclass
class RunningNorm:
    """Running mean/variance of observations (parallel-update formula)."""

    mean: np.ndarray
    var: np.ndarray
    count: float = 1e-4
    enabled: bool = True
    frozen: bool = False
    clip: float = 10.0

    @classmethod
    def create(cls, dim: int, enabled: bool = True) -> "RunningNorm":
        return cls(mean=np.zeros(dim), var=np.ones(dim), enabled=enabled)

    def update(self, x) -> None:
        if self.frozen or not self.enabled:
            return
        x = np.atleast_2d(np.asarray(x, dtype=float))
        b_mean, b_var, b_count = x.mean(axis=0), x.var(axis=0), x.shape[0]
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * b_count / total
        m2 = self.var * self.count + b_var * b_count + delta ** 2 * self.count * b_count / total
        self.var = m2 / total
        self.count = total

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.enabled:
            return x
        return np.clip((x - self.mean) / np.sqrt(self.var + 1e-8), -self.clip, self.clip)

    def copy(self) -> "RunningNorm":
        return replace(self, mean=self.mean.copy(), var=self.var.copy())


@dataclass
class MlpCpgPolicy:
    mlp: MlpParams
    cpg: CpgParams
    normalizer: RunningNorm
    fixed_f: float | None = None
    q_min: np.ndarray = field(default_factory=lambda: Q_MIN.copy())
    q_max: np.ndarray = field(default_factory=lambda: Q_MAX.copy())

    @classmethod
    def create(cls, rng: np.random.Generator, hidden=(256, 256), cpg: CpgParams | None = None,
               fixed_f: float | None = None, normalize: bool = True,
               dtype=np.float64) -> "MlpCpgPolicy":
        cpg = cpg or default_params()
        layout = ObsLayout(cpg.n)
        return cls(mlp=init_mlp(rng, layout.dim, hidden, cpg.n, dtype=dtype), cpg=cpg,
                   normalizer=RunningNorm.create(layout.dim, enabled=normalize),
                   fixed_f=fixed_f)

    @property
    def layout(self) -> ObsLayout:
        return ObsLayout(self.cpg.n)


@dataclass(frozen=True)
class ActResult:
    command: JointCommand
    cpg_state: CpgState
    log_prob: float
    u: np.ndarray          # pre-squash action
    psi: np.ndarray
    fb: FeedbackSignals
    sigma: np.ndarray


def assemble_observation(robot, goal, cpg: CpgState, filt: FilterState,
                         normalizer: RunningNorm | None = None):
    """Build the raw observation; robot channels pass through the 10 Hz filter.

    The returned vector is unnormalised. When ``normalizer`` is given its
    running statistics absorb the new observation.
    """
    sensors = np.concatenate([robot.lin_vel, robot.ang_vel, robot.gravity, robot.q, robot.qd])
    if not np.all(np.isfinite(sensors)):
        raise ValueError("non-finite sensor values")
    filtered, obs_filter = lowpass_step(filt.obs, sensors)
    gravity = filtered[6:9]
    gravity = gravity / np.linalg.norm(gravity)
    n = robot.q.shape[0]
    obs = Observation(
        lin_vel=filtered[0:3], ang_vel=filtered[3:6], gravity=gravity,
        q=filtered[9:9 + n], qd=filtered[9 + n:9 + 2 * n],
        goal=np.asarray(goal.as_array() if hasattr(goal, "as_array") else goal, dtype=float),
        r=np.asarray(cpg.r, dtype=float).copy(), theta=wrap_phase(cpg.theta),
    )
    if normalizer is not None:
        normalizer.update(obs.vector)
    return obs, FilterState(obs_filter, filt.action)


def squash_log_det(u) -> np.ndarray:
    """``log(1 - tanh(u)^2)`` without cancellation for large ``|u|``."""
    u = np.asarray(u)
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def gaussian_tanh_log_prob(noise, sigma, u) -> np.ndarray:
    """Log-density of ``tanh(u)`` with ``u = mean + sigma * noise``, summed over the last axis."""
    log_normal = -0.5 * noise * noise - np.log(sigma) - LOG_SQRT_2PI
    return np.sum(log_normal - squash_log_det(u), axis=-1)


def act(policy: MlpCpgPolicy, obs, cpg_state: CpgState, mode=Mode.STOCHASTIC,
        rng: np.random.Generator | None = None) -> ActResult:
    vec = obs.vector if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    x = policy.normalizer(vec).astype(policy.mlp.weights[0].dtype)
    head = mlp_forward(policy.mlp, x, fixed_f=policy.fixed_f)
    fb = FeedbackSignals(f=head.fb.f, kappa=head.fb.kappa, xi=head.fb.xi, chi=head.fb.chi)
    out = cpg_step(cpg_state, policy.cpg, fb)
    sigma = np.asarray(head.sigma, dtype=float)
    if Mode(mode) is Mode.STOCHASTIC:
        if rng is None:
            raise ValueError("stochastic mode needs an rng")
        noise = rng.standard_normal(out.psi.shape)
    else:
        noise = np.zeros_like(out.psi)
    u = out.psi + sigma * noise
    log_prob = float(gaussian_tanh_log_prob(noise, sigma, u))
    q_hat = squash_to_limits(np.tanh(u), policy.q_min, policy.q_max)
    return ActResult(JointCommand(q_hat), out.new_state, log_prob, u, out.psi, fb, sigma)


def filter_action(filt: FilterState, q_hat):
    y, action = lowpass_step(filt.action, q_hat)
    return y, FilterState(filt.obs, action)
