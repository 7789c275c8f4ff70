"""Coupled Hopf oscillator network written as a pure step function.

The oscillator phases and amplitudes are never stored inside the network:
the previous state goes in as an argument and the next state comes out with
the output signal, so one call is a feedforward map that can be differentiated
without unrolling through time.

Per oscillator ``i``::

    dtheta_i = 2 pi f + sum_j eps_ij sin(theta_j - theta_i - phi_ij) + xi_i
    dr_i     = gamma r_i ((eta_i + kappa_i)^2 - r_i^2)
    theta_i' = theta_i + dtheta_i dt
    r_i'     = max(r_i + dr_i dt, R_FLOOR)
    psi_i    = r_i' cos(theta_i') + chi_i + o_i

All arrays may carry leading batch dimensions; the oscillator axis is last.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi
R_FLOOR = 1e-6

N_LEGS = 4
JOINTS_PER_LEG = 3
N_JOINTS = N_LEGS * JOINTS_PER_LEG
LEG_NAMES = ("FL", "FR", "RL", "RR")
JOINT_NAMES = ("hip_roll", "hip_pitch", "knee")

# per-leg values, tiled over the four legs
LEG_OFFSET = (0.0, 0.28, -0.1)
LEG_AMPLITUDE = (0.0, 0.8, 0.8)

F_MAX = 3.0
KAPPA_MAX = 1.0
XI_MAX = TWO_PI
CHI_MAX = 0.5


class CpgDomainError(ValueError):
    """Raised when an oscillator input is non-finite or out of its domain."""


def _require_finite(name: str, value) -> None:
    if not np.all(np.isfinite(value)):
        raise CpgDomainError(f"non-finite values in {name!r}")


@dataclass(frozen=True)
class CpgParams:
    """Oscillator constants.

    ``eps`` and ``phi`` are the learnable coupling weights and phase biases;
    their diagonals are masked to zero on construction.
    """

    eps: np.ndarray
    phi: np.ndarray
    eta: np.ndarray
    offset: np.ndarray
    gamma: float = 12.0
    dt: float = 0.04
    symmetric: bool = False

    def __post_init__(self):
        eps = np.array(self.eps, dtype=float)
        phi = np.array(self.phi, dtype=float)
        eta = np.array(self.eta, dtype=float)
        offset = np.array(self.offset, dtype=float)
        n = eta.shape[-1]
        if eps.shape != (n, n) or phi.shape != (n, n) or offset.shape != (n,):
            raise CpgDomainError(
                f"shape mismatch: eps {eps.shape}, phi {phi.shape}, "
                f"eta {eta.shape}, offset {offset.shape}"
            )
        for name, value in (("eps", eps), ("phi", phi), ("eta", eta),
                            ("offset", offset), ("gamma", self.gamma), ("dt", self.dt)):
            _require_finite(name, value)
        if self.gamma <= 0:
            raise CpgDomainError(f"gamma must be positive, got {self.gamma}")
        if self.dt <= 0:
            raise CpgDomainError(f"dt must be positive, got {self.dt}")
        np.fill_diagonal(eps, 0.0)
        np.fill_diagonal(phi, 0.0)
        if self.symmetric and not is_antisymmetric(phi):
            raise CpgDomainError("phi must be antisymmetric modulo 2*pi in symmetric mode")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "offset", offset)

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    def replace(self, **changes) -> "CpgParams":
        values = dict(eps=self.eps, phi=self.phi, eta=self.eta, offset=self.offset,
                      gamma=self.gamma, dt=self.dt, symmetric=self.symmetric)
        values.update(changes)
        return CpgParams(**values)


@dataclass(frozen=True)
class CpgState:
    theta: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))


@dataclass(frozen=True)
class FeedbackSignals:
    """Modulation produced by the feedback network.

    ``f`` has the batch shape (scalar for a single network); the other three
    carry the oscillator axis.
    """

    f: np.ndarray
    kappa: np.ndarray
    xi: np.ndarray
    chi: np.ndarray

    def __post_init__(self):
        for name in ("f", "kappa", "xi", "chi"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def constant(cls, n: int, f: float = 0.0) -> "FeedbackSignals":
        z = np.zeros(n)
        return cls(f=np.float64(f), kappa=z, xi=z.copy(), chi=z.copy())


@dataclass(frozen=True)
class CpgOutput:
    psi: np.ndarray
    new_state: CpgState
    # time derivatives used for the update; handy for inspection and gradients
    theta_dot: np.ndarray = field(repr=False, default=None)
    r_dot: np.ndarray = field(repr=False, default=None)


def is_antisymmetric(phi: np.ndarray, atol: float = 1e-9) -> bool:
    d = np.mod(phi + phi.T + np.pi, TWO_PI) - np.pi
    return bool(np.all(np.abs(d) < atol))


def tile_legs(per_leg) -> np.ndarray:
    return np.tile(np.asarray(per_leg, dtype=float), N_LEGS)


def leg_phase_pattern(gait: str = "trot") -> np.ndarray:
    """Per-leg phase for a named gait, legs ordered FL, FR, RL, RR."""
    patterns = {
        "trot": (0.0, np.pi, np.pi, 0.0),
        "pace": (0.0, np.pi, 0.0, np.pi),
        "bound": (0.0, 0.0, np.pi, np.pi),
        "pronk": (0.0, 0.0, 0.0, 0.0),
    }
    try:
        return np.asarray(patterns[gait])
    except KeyError:
        raise ValueError(f"unknown gait {gait!r}; choose from {sorted(patterns)}") from None


def phase_bias_from_targets(target_phase: np.ndarray) -> np.ndarray:
    """Phase-bias matrix whose locked state is ``theta_i - theta_j = target_i - target_j``."""
    target_phase = np.asarray(target_phase, dtype=float)
    phi = target_phase[None, :] - target_phase[:, None]
    np.fill_diagonal(phi, 0.0)
    return phi


def default_params(coupling: float = 1.0, gait: str = "trot",
                   knee_lag: float = -np.pi / 2) -> CpgParams:
    """Twelve-joint network with the fixed constants of the locomotion setup.

    The coupling matrices start from a named gait (each knee lagging its hip
    pitch by ``knee_lag``); they are trainable afterwards.
    """
    legs = leg_phase_pattern(gait)
    joint = np.array([0.0, 0.0, knee_lag])
    target = (legs[:, None] + joint[None, :]).ravel()
    eps = np.full((N_JOINTS, N_JOINTS), float(coupling))
    return CpgParams(
        eps=eps,
        phi=phase_bias_from_targets(target),
        eta=tile_legs(LEG_AMPLITUDE),
        offset=tile_legs(LEG_OFFSET),
        gamma=12.0,
        dt=0.04,
    )


def _validate(state: CpgState, fb: FeedbackSignals) -> None:
    for name in ("theta", "r"):
        _require_finite(f"state.{name}", getattr(state, name))
    for name in ("f", "kappa", "xi", "chi"):
        _require_finite(f"fb.{name}", getattr(fb, name))


def cpg_step(state: CpgState, params: CpgParams, fb: FeedbackSignals,
             validate: bool = True) -> CpgOutput:
    if validate:
        _validate(state, fb)
    theta, r = state.theta, state.r
    f = np.asarray(fb.f)[..., None]
    diff = theta[..., None, :] - theta[..., :, None] - params.phi
    coupling = np.sum(params.eps * np.sin(diff), axis=-1)
    theta_dot = TWO_PI * f + coupling + fb.xi
    amp = params.eta + fb.kappa
    r_dot = params.gamma * r * (amp * amp - r * r)
    theta_new = theta + theta_dot * params.dt
    r_new = np.maximum(r + r_dot * params.dt, R_FLOOR)
    psi = r_new * np.cos(theta_new) + fb.chi + params.offset
    return CpgOutput(psi=psi, new_state=CpgState(theta_new, r_new),
                     theta_dot=theta_dot, r_dot=r_dot)


def rollout_cpg(state0: CpgState, params: CpgParams,
                fb_sequence) -> list[CpgOutput]:
    """Open-loop rollout: fold :func:`cpg_step` over a feedback sequence."""
    fb_sequence = list(fb_sequence)
    if not fb_sequence:
        raise CpgDomainError("feedback sequence is empty")
    outputs = []
    state = state0
    for k, fb in enumerate(fb_sequence):
        try:
            out = cpg_step(state, params, fb)
        except CpgDomainError as exc:
            raise CpgDomainError(f"step {k}: {exc}") from exc
        outputs.append(out)
        state = out.new_state
    return outputs


def wrap_phase(theta):
    """Map phases onto ``[0, 2 pi)``."""
    wrapped = np.mod(theta, TWO_PI)
    # mod can round up to exactly 2 pi for tiny negative inputs
    return np.where(wrapped >= TWO_PI, 0.0, wrapped)
