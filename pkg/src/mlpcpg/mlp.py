"""Feedback network: a tanh MLP whose head is squashed into bounded feedback.

The same dense-layer helpers back the critics in :mod:`mlpcpg.sac`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpg import CHI_MAX, F_MAX, KAPPA_MAX, N_JOINTS, XI_MAX, FeedbackSignals

LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0


# ---------------------------------------------------------------------------
# dense tanh stack

@dataclass
class DenseParams:
    weights: list
    biases: list

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "DenseParams":
        arrays, k = [], 0
        for a in self.arrays():
            arrays.append(np.asarray(vec[k:k + a.size], dtype=a.dtype).reshape(a.shape))
            k += a.size
        if k != np.size(vec):
            raise ValueError(f"flat vector has {np.size(vec)} entries, expected {k}")
        return DenseParams(arrays[0::2], arrays[1::2])

    def copy(self) -> "DenseParams":
        return DenseParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def astype(self, dtype) -> "DenseParams":
        return DenseParams([w.astype(dtype) for w in self.weights],
                           [b.astype(dtype) for b in self.biases])

    def zeros_like(self) -> "DenseParams":
        return DenseParams([np.zeros_like(w) for w in self.weights],
                           [np.zeros_like(b) for b in self.biases])


def orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def init_dense(rng: np.random.Generator, sizes, hidden_gain: float = np.sqrt(2.0),
               out_gain: float = 1.0, dtype=np.float64) -> DenseParams:
    weights, biases = [], []
    n_layers = len(sizes) - 1
    for k in range(n_layers):
        gain = out_gain if k == n_layers - 1 else hidden_gain
        weights.append(orthogonal(rng, sizes[k], sizes[k + 1], gain).astype(dtype))
        biases.append(np.zeros(sizes[k + 1], dtype=dtype))
    return DenseParams(weights, biases)


def dense_forward(params: DenseParams, x: np.ndarray):
    """Tanh hidden layers, linear output. Returns ``(out, activations)``."""
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            h = np.tanh(h)
        acts.append(h)
    return h, acts


def dense_backward(params: DenseParams, acts: list, g_out: np.ndarray,
                   need_input_grad: bool = True, param_grads: bool = True):
    """VJP of :func:`dense_forward`; returns ``(DenseParams grads, input grad)``.

    Either half can be skipped: critics used inside the actor loss only need
    the input gradient, critic regression only the weight gradients.
    """
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    g = g_out
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            g = g * (1.0 - acts[k + 1] * acts[k + 1])
        if param_grads:
            x = acts[k]
            gw[k] = x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            gb[k] = g.reshape(-1, g.shape[-1]).sum(axis=0)
        if k > 0 or need_input_grad:
            g = g @ params.weights[k].T
    return (DenseParams(gw, gb) if param_grads else None), (g if need_input_grad else None)


# ---------------------------------------------------------------------------
# feedback head

MlpParams = DenseParams


@dataclass
class FeedbackHead:
    fb: FeedbackSignals
    sigma: np.ndarray


@dataclass
class HeadGrads:
    """Upstream gradients with respect to the squashed head outputs."""

    f: np.ndarray
    kappa: np.ndarray
    xi: np.ndarray
    chi: np.ndarray
    sigma: np.ndarray


def head_size(n_osc: int = N_JOINTS) -> int:
    return 1 + 4 * n_osc


def init_mlp(rng: np.random.Generator, obs_dim: int = 60, hidden=(256, 256),
             n_osc: int = N_JOINTS, dtype=np.float64) -> MlpParams:
    """Orthogonal init; the output layer is scaled by 0.01 so the rhythm
    initially comes from the oscillators alone."""
    return init_dense(rng, [obs_dim, *hidden, head_size(n_osc)], out_gain=0.01, dtype=dtype)


def _split_head(raw: np.ndarray):
    n = (raw.shape[-1] - 1) // 4
    return (raw[..., 0], raw[..., 1:1 + n], raw[..., 1 + n:1 + 2 * n],
            raw[..., 1 + 2 * n:1 + 3 * n], raw[..., 1 + 3 * n:])


def squash_head(raw: np.ndarray, fixed_f: float | None = None) -> FeedbackHead:
    f_raw, k_raw, x_raw, c_raw, ls_raw = _split_head(raw)
    if fixed_f is None:
        f = 0.5 * F_MAX * (np.tanh(f_raw) + 1.0)
    else:
        f = np.full(f_raw.shape, fixed_f, dtype=raw.dtype)
    fb = FeedbackSignals(
        f=f,
        kappa=KAPPA_MAX * np.tanh(k_raw),
        xi=XI_MAX * np.tanh(x_raw),
        chi=CHI_MAX * np.tanh(c_raw),
    )
    sigma = np.exp(np.clip(ls_raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX))
    return FeedbackHead(fb=fb, sigma=sigma)


def squash_head_backward(raw: np.ndarray, upstream: HeadGrads,
                         fixed_f: float | None = None) -> np.ndarray:
    f_raw, k_raw, x_raw, c_raw, ls_raw = _split_head(raw)
    g = np.empty_like(raw)
    if fixed_f is None:
        g[..., 0] = upstream.f * 0.5 * F_MAX * (1.0 - np.tanh(f_raw) ** 2)
    else:
        g[..., 0] = 0.0
    n = k_raw.shape[-1]
    g[..., 1:1 + n] = upstream.kappa * KAPPA_MAX * (1.0 - np.tanh(k_raw) ** 2)
    g[..., 1 + n:1 + 2 * n] = upstream.xi * XI_MAX * (1.0 - np.tanh(x_raw) ** 2)
    g[..., 1 + 2 * n:1 + 3 * n] = upstream.chi * CHI_MAX * (1.0 - np.tanh(c_raw) ** 2)
    inside = (ls_raw > LOG_SIGMA_MIN) & (ls_raw < LOG_SIGMA_MAX)
    sigma = np.exp(np.clip(ls_raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX))
    g[..., 1 + 3 * n:] = np.where(inside, upstream.sigma * sigma, 0.0)
    return g


def _check_obs(params: MlpParams, obs: np.ndarray) -> None:
    if obs.shape[-1] != params.weights[0].shape[0]:
        raise ValueError(
            f"observation has dimension {obs.shape[-1]}, network expects "
            f"{params.weights[0].shape[0]}"
        )
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite observation")


def mlp_forward(params: MlpParams, obs, fixed_f: float | None = None,
                return_cache: bool = False):
    """Map observations to feedback signals and the policy standard deviation.

    With ``return_cache`` the dense-layer activations are returned as well,
    for reuse by :func:`mlp_backward`.
    """
    obs = np.asarray(obs)
    _check_obs(params, obs)
    raw, acts = dense_forward(params, obs)
    head = squash_head(raw, fixed_f)
    return (head, acts) if return_cache else head


def mlp_backward(params: MlpParams, obs, upstream: HeadGrads,
                 fixed_f: float | None = None, cache=None):
    """Gradients of a scalar with respect to the weights and the observation."""
    obs = np.asarray(obs)
    _check_obs(params, obs)
    if cache is None:
        _, cache = dense_forward(params, obs)
    raw = cache[-1]
    for name in ("kappa", "xi", "chi", "sigma"):
        if np.shape(getattr(upstream, name)) != raw.shape[:-1] + ((raw.shape[-1] - 1) // 4,):
            raise ValueError(f"upstream {name!r} has shape {np.shape(getattr(upstream, name))}")
    g_raw = squash_head_backward(raw, upstream, fixed_f)
    return dense_backward(params, cache, g_raw)
