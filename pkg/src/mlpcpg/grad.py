"""Reverse-mode gradients of the oscillator step and a finite-difference oracle.

The backward pass takes exactly one step's inputs. The incoming oscillator
state is an ordinary input, so there is no path back into earlier steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cpg import TWO_PI, R_FLOOR, CpgDomainError, CpgParams, CpgState, FeedbackSignals


@dataclass
class CpgUpstream:
    """Gradients of some scalar with respect to the step outputs."""

    theta: np.ndarray
    r: np.ndarray
    psi: np.ndarray


@dataclass
class CpgGrads:
    theta: np.ndarray
    r: np.ndarray
    f: np.ndarray
    kappa: np.ndarray
    xi: np.ndarray
    chi: np.ndarray
    eps: np.ndarray
    phi: np.ndarray


@dataclass
class StepJacobians:
    """Dense Jacobians of ``(theta', r', psi)`` for a single unbatched step.

    Rows index the stacked outputs ``[theta' | r' | psi]`` (length ``3n``).
    ``d_out_d_params`` columns are ``[eps.ravel() | phi.ravel()]``.
    """

    d_out_d_state: np.ndarray
    d_out_d_fb: np.ndarray
    d_out_d_params: np.ndarray


@dataclass
class GradCheckReport:
    max_abs_err: float
    max_rel_err: float
    worst_coordinate: tuple
    passed: bool


def cpg_step_backward(state: CpgState, params: CpgParams, fb: FeedbackSignals,
                      upstream: CpgUpstream) -> CpgGrads:
    """Vector-Jacobian product of :func:`mlpcpg.cpg.cpg_step`.

    Parameter gradients are summed over any batch dimensions; all other
    gradients keep the shape of their inputs.
    """
    for name in ("theta", "r", "psi"):
        if not np.all(np.isfinite(getattr(upstream, name))):
            raise CpgDomainError(f"non-finite upstream gradient {name!r}")
    dt, gamma = params.dt, params.gamma
    theta, r = state.theta, state.r
    f = np.asarray(fb.f)

    diff = theta[..., None, :] - theta[..., :, None] - params.phi
    sin_d, cos_d = np.sin(diff), np.cos(diff)
    theta_dot = TWO_PI * f[..., None] + np.sum(params.eps * sin_d, axis=-1) + fb.xi
    amp = params.eta + fb.kappa
    r_pre = r + gamma * r * (amp * amp - r * r) * dt
    theta_new = theta + theta_dot * dt
    r_new = np.maximum(r_pre, R_FLOOR)

    g_theta_new = upstream.theta - upstream.psi * r_new * np.sin(theta_new)
    g_r_new = upstream.r + upstream.psi * np.cos(theta_new)
    g_chi = np.array(upstream.psi, dtype=float, copy=True)

    g_r_pre = np.where(r_pre > R_FLOOR, g_r_new, 0.0)
    g_r = g_r_pre * (1.0 + gamma * dt * (amp * amp - 3.0 * r * r))
    g_kappa = g_r_pre * (2.0 * gamma * dt * r * amp)

    g_theta_dot = g_theta_new * dt
    g_xi = g_theta_dot
    g_f = TWO_PI * np.sum(g_theta_dot, axis=-1)

    # d(theta_dot_i)/d(theta_j) = eps_ij cos(d_ij), d/d(theta_i) = -sum_j eps_ij cos(d_ij)
    weighted = params.eps * cos_d * g_theta_dot[..., :, None]
    g_theta = (g_theta_new + np.sum(weighted, axis=-2) - np.sum(weighted, axis=-1))

    batch_axes = tuple(range(g_theta_dot.ndim - 1))
    g_eps = np.sum(g_theta_dot[..., :, None] * sin_d, axis=batch_axes)
    g_phi = -np.sum(weighted, axis=batch_axes)
    np.fill_diagonal(g_eps, 0.0)
    np.fill_diagonal(g_phi, 0.0)

    return CpgGrads(theta=g_theta, r=g_r, f=g_f, kappa=g_kappa, xi=g_xi,
                    chi=g_chi, eps=g_eps, phi=g_phi)


def cpg_step_jacobians(state: CpgState, params: CpgParams,
                       fb: FeedbackSignals) -> StepJacobians:
    """Dense Jacobians assembled row by row from the VJP."""
    n = params.n
    rows_state, rows_fb, rows_params = [], [], []
    for k in range(3 * n):
        e = np.zeros(3 * n)
        e[k] = 1.0
        g = cpg_step_backward(state, params, fb,
                              CpgUpstream(theta=e[:n], r=e[n:2 * n], psi=e[2 * n:]))
        rows_state.append(np.concatenate([g.theta, g.r]))
        rows_fb.append(np.concatenate([np.atleast_1d(g.f), g.kappa, g.xi, g.chi]))
        rows_params.append(np.concatenate([g.eps.ravel(), g.phi.ravel()]))
    return StepJacobians(np.array(rows_state), np.array(rows_fb), np.array(rows_params))


def finite_diff_jacobian(fn: Callable[[np.ndarray], np.ndarray], point,
                         h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``fn`` at ``point``; shape ``(out, in)``."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(point, dtype=float).ravel()
    f0 = np.atleast_1d(np.asarray(fn(x.copy()), dtype=float)).ravel()
    jac = np.empty((f0.size, x.size))
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        fp = np.atleast_1d(np.asarray(fn(xp), dtype=float)).ravel()
        fm = np.atleast_1d(np.asarray(fn(xm), dtype=float)).ravel()
        jac[:, k] = (fp - fm) / (2.0 * h)
    return jac


def grad_check(analytic, numeric, rel_tol: float = 1e-5,
               abs_tol: float = 1e-8) -> GradCheckReport:
    """Compare two gradient arrays coordinate by coordinate.

    The relative error of a coordinate is ``|a - n| / max(|a|, |n|, abs_tol)``,
    so entries that are both below ``abs_tol`` are judged on absolute error.
    """
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {n.shape}")
    if a.size == 0:
        return GradCheckReport(0.0, 0.0, (), True)
    abs_err = np.abs(a - n)
    rel_err = abs_err / np.maximum(np.maximum(np.abs(a), np.abs(n)), abs_tol)
    worst = np.unravel_index(int(np.argmax(rel_err)), a.shape)
    max_rel = float(rel_err[worst])
    return GradCheckReport(
        max_abs_err=float(abs_err.max()),
        max_rel_err=max_rel,
        worst_coordinate=tuple(int(i) for i in worst),
        passed=bool(max_rel <= rel_tol),
    )


def relative_error(analytic, numeric) -> float:
    """Normwise relative error ``||a - n|| / max(||a||, ||n||)``; 0 when both vanish.

    Unlike the per-coordinate ratio in :func:`grad_check`, this is not
    dominated by near-zero coordinates whose finite-difference estimate is
    mostly rounding noise.
    """
    a = np.ravel(np.asarray(analytic, dtype=float))
    n = np.ravel(np.asarray(numeric, dtype=float))
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {n.shape}")
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    return float(np.linalg.norm(a - n) / scale) if scale > 0 else 0.0
