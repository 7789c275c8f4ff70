"""Soft actor-critic for the MLP-CPG policy, with smoothness and frequency losses.

The actor graph for one sampled state ``s`` is::

    x = norm(s) -> MLP -> (f, kappa, xi, chi, sigma)
    (theta, r) read from s  -> oscillator step -> psi
    u = psi + sigma * noise,  a = tanh(u)

The oscillator state read from ``s`` is a constant input, so each gradient
covers a single step. The actor loss is::

    L = mean(alpha log pi(a|s) - min(Q1, Q2)(x, a))
        + lam_T |chi(s) - chi(s')|^2 + lam_S |chi(s) - chi(s + delta n)|^2
        + lam_f (f(s) - f_ref(|v_goal|))^2

with every squared norm averaged over the batch.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cpg import CpgDomainError, CpgParams, CpgState, FeedbackSignals, cpg_step
from .env import EnvConfig, QuadrupedEnv, Status
from .freqcurve import f_ref
from .grad import CpgUpstream, cpg_step_backward
from .mlp import (DenseParams, HeadGrads, dense_backward, dense_forward, init_dense,
                  squash_head, squash_head_backward)
from .policy import (FilterState, MlpCpgPolicy, Mode, act, assemble_observation,
                     filter_action, gaussian_tanh_log_prob)

log = logging.getLogger(__name__)

METRICS_SCHEMA_VERSION = 1
METRICS_COLUMNS = ("schema_version", "step", "episode", "return", "length", "status",
                   "critic_loss", "actor_loss", "loss_temporal", "loss_spatial",
                   "loss_frequency", "alpha", "mean_f", "mean_f_ref")

FREQ_MODES = ("fixed-1.5", "fixed-3.0", "adaptive-curve", "adaptive-free")


class TrainingAborted(RuntimeError):
    """A loss became non-finite; the offending batch was dumped to disk."""


@dataclass
class SacConfig:
    discount: float = 0.95
    target_smoothing: float = 0.999
    lr: float = 3e-4
    weight_decay: float = 1e-6
    batch_size: int = 128
    updates_per_step: int = 4
    lambda_temporal: float = 1e-3
    lambda_spatial: float = 1e-3
    lambda_frequency: float = 1e-2
    replay_capacity: int = 300_000
    warmup_steps: int = 5_000
    target_entropy: float | None = None     # None -> minus the action dimension
    perturbation_std: float = 0.05
    init_alpha: float = 0.1
    hidden: tuple = (256, 256)
    critic_hidden: tuple = (256, 256)
    freq_mode: str = "adaptive-curve"
    normalize_obs: bool = True
    learn_coupling: bool = True             # False freezes eps and phi
    dtype: str = "float32"
    checkpoint_every: int = 50_000

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if not 0.0 < self.target_smoothing < 1.0:
            raise ValueError("target smoothing must lie in (0, 1)")
        if min(self.lambda_temporal, self.lambda_spatial, self.lambda_frequency) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.freq_mode not in FREQ_MODES:
            raise ValueError(f"freq_mode must be one of {FREQ_MODES}, got {self.freq_mode!r}")
        self.hidden = tuple(self.hidden)
        self.critic_hidden = tuple(self.critic_hidden)

    @property
    def fixed_f(self) -> float | None:
        if self.freq_mode.startswith("fixed-"):
            return float(self.freq_mode.split("-", 1)[1])
        return None

    @property
    def effective_lambda_frequency(self) -> float:
        return self.lambda_frequency if self.freq_mode == "adaptive-curve" else 0.0


# ---------------------------------------------------------------------------
# replay

@dataclass
class Transition:
    s: np.ndarray
    u: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool
    chi: np.ndarray
    f: float


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int,
                 rng: np.random.Generator, dtype=np.float32):
        self.capacity = int(capacity)
        self.rng = rng
        self.s = np.zeros((capacity, obs_dim), dtype=dtype)
        self.s_next = np.zeros((capacity, obs_dim), dtype=dtype)
        self.u = np.zeros((capacity, act_dim), dtype=dtype)
        self.chi = np.zeros((capacity, act_dim), dtype=dtype)
        self.r = np.zeros(capacity, dtype=dtype)
        self.f = np.zeros(capacity, dtype=dtype)
        self.done = np.zeros(capacity, dtype=dtype)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        if not (np.all(np.isfinite(t.s)) and np.all(np.isfinite(t.s_next))
                and np.all(np.isfinite(t.u)) and np.isfinite(t.r)):
            raise ValueError("non-finite transition")
        k = self.cursor
        self.s[k], self.s_next[k], self.u[k] = t.s, t.s_next, t.u
        self.chi[k], self.r[k], self.f[k], self.done[k] = t.chi, t.r, t.f, float(t.done)
        self.cursor = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int) -> np.ndarray:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, need {batch_size}")
        return self.rng.integers(0, self.size, batch_size)

    def sample(self, batch_size: int) -> dict:
        idx = self.sample_indices(batch_size)
        return {name: getattr(self, name)[idx] for name in
                ("s", "u", "r", "s_next", "done", "chi", "f")}


# ---------------------------------------------------------------------------
# optimisation

class Adam:
    """Adam with L2 weight decay folded into the gradient."""

    def __init__(self, params: list, lr: float = 3e-4, weight_decay: float = 0.0,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr, self.weight_decay = lr, weight_decay
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        step = self.lr / c1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = np.array(g, dtype=p.dtype)
            if self.weight_decay:
                g += self.weight_decay * p
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            g *= g
            g *= 1.0 - self.b2
            v += g
            # reuse g as scratch for the denominator
            np.sqrt(v * (1.0 / c2), out=g)
            g += self.eps
            np.divide(m, g, out=g)
            g *= step
            p -= g


def polyak_update(target: DenseParams, online: DenseParams, smoothing: float) -> None:
    """``target <- smoothing * target + (1 - smoothing) * online``, in place."""
    for t, o in zip(target.arrays(), online.arrays()):
        t *= smoothing
        t += (1.0 - smoothing) * o


def init_critic(rng: np.random.Generator, obs_dim: int, act_dim: int, hidden=(256, 256),
                dtype=np.float64) -> DenseParams:
    return init_dense(rng, [obs_dim + act_dim, *hidden, 1], out_gain=1.0, dtype=dtype)


def q_values(critic: DenseParams, x: np.ndarray, a: np.ndarray):
    out, acts = dense_forward(critic, np.concatenate([x, a.astype(x.dtype)], axis=-1))
    return out[..., 0], acts


# ---------------------------------------------------------------------------
# losses

def frequency_reference(goal: np.ndarray) -> np.ndarray:
    """Reference step frequency for goal rows ``(vx, vy, yaw_rate)``."""
    goal = np.asarray(goal, dtype=float)
    return f_ref(np.hypot(goal[..., 0], goal[..., 1]))


def frequency_loss(f_out, goal) -> float:
    """Mean squared distance between the commanded frequency and the reference."""
    d = np.asarray(f_out, dtype=float) - frequency_reference(goal)
    return float(np.mean(d * d))


def chi_of(mlp: DenseParams, x: np.ndarray) -> np.ndarray:
    raw, _ = dense_forward(mlp, x)
    return squash_head(raw).fb.chi


def regularization_losses(mlp: DenseParams, x_t: np.ndarray, x_t1: np.ndarray,
                          rng: np.random.Generator, delta: float = 0.05):
    """Temporal and spatial smoothness of the setpoint feedback ``chi``.

    Inputs are normalised observations; the spatial perturbation is
    ``N(0, delta^2)`` noise in those units.
    """
    chi_t = chi_of(mlp, x_t)
    chi_t1 = chi_of(mlp, x_t1)
    x_hat = x_t + delta * rng.standard_normal(x_t.shape).astype(x_t.dtype)
    chi_hat = chi_of(mlp, x_hat)
    l_t = float(np.mean(np.sum((chi_t - chi_t1) ** 2, axis=-1)))
    l_s = float(np.mean(np.sum((chi_t - chi_hat) ** 2, axis=-1)))
    return l_t, l_s


@dataclass
class ActorBatch:
    """Everything the actor loss needs, already normalised and with fixed noise."""

    x: np.ndarray           # normalised s
    x_next: np.ndarray      # normalised s'
    x_perturbed: np.ndarray
    cpg_state: CpgState     # oscillator state read from raw s
    goal: np.ndarray        # raw goal rows
    noise: np.ndarray       # standard normal, shape (B, n)


@dataclass
class ActorTerms:
    total: float
    sac: float
    temporal: float
    spatial: float
    frequency: float
    log_prob: np.ndarray
    f: np.ndarray


@dataclass
class ActorGrads:
    mlp: DenseParams
    eps: np.ndarray
    phi: np.ndarray


def _as_signals(fb: FeedbackSignals) -> FeedbackSignals:
    return FeedbackSignals(f=fb.f, kappa=fb.kappa, xi=fb.xi, chi=fb.chi)


def policy_forward(mlp: DenseParams, cpg: CpgParams, x: np.ndarray, state: CpgState,
                   noise: np.ndarray, fixed_f: float | None = None):
    """Sample ``u`` and its log-density for a batch; returns a dict of intermediates."""
    raw, acts = dense_forward(mlp, x)
    head = squash_head(raw, fixed_f)
    out = cpg_step(state, cpg, head.fb, validate=False)
    sigma = np.asarray(head.sigma, dtype=float)
    u = out.psi + sigma * noise
    logp = gaussian_tanh_log_prob(noise, sigma, u)
    return dict(raw=raw, acts=acts, head=head, out=out, sigma=sigma, u=u, logp=logp)


def stacked_forward(mlp: DenseParams, batch: ActorBatch):
    return dense_forward(mlp, np.concatenate([batch.x, batch.x_next, batch.x_perturbed], axis=0))


def actor_loss(mlp: DenseParams, cpg: CpgParams, critics, alpha: float, batch: ActorBatch,
               lambdas=(1e-3, 1e-3, 1e-2), fixed_f: float | None = None,
               need_grad: bool = True, forward=None):
    """Actor objective and its exact gradient with respect to the MLP weights and
    the coupling matrices ``eps`` and ``phi``.

    ``critics`` is a pair of Q-networks. The three MLP evaluations (at ``s``,
    ``s'`` and the perturbed state) share one stacked forward and backward pass.
    ``forward`` may carry that pass, as returned by :func:`stacked_forward`.
    """
    lam_t, lam_s, lam_f = lambdas
    b = batch.x.shape[0]
    n = batch.noise.shape[-1]
    raw_all, acts = forward if forward is not None else stacked_forward(mlp, batch)
    head_all = squash_head(raw_all, fixed_f)
    chi_all = head_all.fb.chi
    chi, chi_next, chi_hat = chi_all[:b], chi_all[b:2 * b], chi_all[2 * b:]
    fb = FeedbackSignals(f=head_all.fb.f[:b], kappa=head_all.fb.kappa[:b],
                         xi=head_all.fb.xi[:b], chi=chi)
    sigma = np.asarray(head_all.sigma[:b], dtype=float)

    out = cpg_step(batch.cpg_state, cpg, fb, validate=False)
    u = out.psi + sigma * batch.noise
    a = np.tanh(u)
    logp = gaussian_tanh_log_prob(batch.noise, sigma, u)

    q_parts = [q_values(c, batch.x, a) for c in critics]
    q1, q2 = q_parts[0][0], q_parts[1][0]
    first = q1 <= q2
    q_min = np.where(first, q1, q2)

    sac = float(np.mean(alpha * logp - q_min))
    d_t = chi - chi_next
    d_s = chi - chi_hat
    l_t = float(np.mean(np.sum(d_t * d_t, axis=-1)))
    l_s = float(np.mean(np.sum(d_s * d_s, axis=-1)))
    f = np.asarray(fb.f, dtype=float)
    d_f = f - frequency_reference(batch.goal)
    l_f = float(np.mean(d_f * d_f)) if lam_f else 0.0
    total = sac + lam_t * l_t + lam_s * l_s + lam_f * l_f
    terms = ActorTerms(total=total, sac=sac, temporal=l_t, spatial=l_s, frequency=l_f,
                       log_prob=logp, f=f)
    if not need_grad:
        return terms, None

    # d total / d a through the selected critic
    g_a = np.zeros_like(a)
    for k, (critic, (_, c_acts)) in enumerate(zip(critics, q_parts)):
        mask = first if k == 0 else ~first
        g_q = np.where(mask, -1.0 / b, 0.0)[:, None].astype(c_acts[0].dtype)
        _, g_in = dense_backward(critic, c_acts, g_q, need_input_grad=True, param_grads=False)
        g_a += g_in[:, -n:]
    w_logp = alpha / b
    g_u = g_a * (1.0 - a * a) + w_logp * 2.0 * a
    g_sigma = g_u * batch.noise - w_logp / sigma

    g_cpg = cpg_step_backward(batch.cpg_state, cpg, fb,
                              CpgUpstream(theta=np.zeros_like(u), r=np.zeros_like(u), psi=g_u))
    g_chi_all = np.zeros_like(chi_all)
    g_chi_all[:b] = g_cpg.chi + (2.0 * lam_t / b) * d_t + (2.0 * lam_s / b) * d_s
    g_chi_all[b:2 * b] = -(2.0 * lam_t / b) * d_t
    g_chi_all[2 * b:] = -(2.0 * lam_s / b) * d_s
    zeros_rest = np.zeros((2 * b, n))
    upstream = HeadGrads(
        f=np.concatenate([g_cpg.f + (2.0 * lam_f / b) * d_f, np.zeros(2 * b)]),
        kappa=np.concatenate([g_cpg.kappa, zeros_rest]),
        xi=np.concatenate([g_cpg.xi, zeros_rest]),
        chi=g_chi_all,
        sigma=np.concatenate([g_sigma, zeros_rest]),
    )
    g_raw = squash_head_backward(raw_all, upstream, fixed_f).astype(raw_all.dtype)
    g_mlp, _ = dense_backward(mlp, acts, g_raw, need_input_grad=False)
    return terms, ActorGrads(mlp=g_mlp, eps=g_cpg.eps, phi=g_cpg.phi)


def critic_targets(target_critics, x_next: np.ndarray, a_next: np.ndarray,
                   logp_next: np.ndarray, r: np.ndarray, done: np.ndarray,
                   alpha: float, discount: float) -> np.ndarray:
    q1, _ = q_values(target_critics[0], x_next, a_next)
    q2, _ = q_values(target_critics[1], x_next, a_next)
    soft = np.minimum(q1, q2) - alpha * logp_next
    return r + discount * (1.0 - done) * soft


def critic_loss(critics, x: np.ndarray, a: np.ndarray, y: np.ndarray, need_grad: bool = True):
    """Half the summed MSE of both critics; returns ``(loss, grads)``."""
    loss = 0.0
    grads = []
    b = x.shape[0]
    for critic in critics:
        q, acts = q_values(critic, x, a)
        err = q - y.astype(q.dtype)
        loss += 0.5 * float(np.mean(err * err))
        if need_grad:
            g, _ = dense_backward(critic, acts, (err / b)[:, None], need_input_grad=False)
            grads.append(g)
    return loss, grads


def temperature_gradient(log_alpha: float, logp: np.ndarray, target_entropy: float) -> float:
    """d/d(log alpha) of ``mean(-alpha (log pi + H_target))``."""
    return float(-math.exp(log_alpha) * np.mean(logp + target_entropy))


# ---------------------------------------------------------------------------
# agent

ALPHA_FLOOR = 1e-6


@dataclass
class UpdateStats:
    critic_loss: float
    actor: ActorTerms
    alpha: float


class SacAgent:
    """Owns the policy, critics, optimisers and temperature. Single writer."""

    def __init__(self, cfg: SacConfig, rng: np.random.Generator, cpg: CpgParams | None = None):
        self.cfg = cfg
        self.rng = rng
        dtype = np.dtype(cfg.dtype)
        self.policy = MlpCpgPolicy.create(rng, hidden=cfg.hidden, cpg=cpg,
                                          fixed_f=cfg.fixed_f, normalize=cfg.normalize_obs,
                                          dtype=dtype)
        self.layout = self.policy.layout
        obs_dim, n = self.layout.dim, self.policy.cpg.n
        self.critics = [init_critic(rng, obs_dim, n, cfg.critic_hidden, dtype) for _ in range(2)]
        self.targets = [c.copy() for c in self.critics]
        self.eps = self.policy.cpg.eps.copy()
        self.phi = self.policy.cpg.phi.copy()
        self.log_alpha = np.array([math.log(cfg.init_alpha)])
        self.target_entropy = (-float(n) if cfg.target_entropy is None
                               else float(cfg.target_entropy))
        actor_params = self.policy.mlp.arrays()
        if cfg.learn_coupling:
            actor_params = actor_params + [self.eps, self.phi]
        self.actor_opt = Adam(actor_params, cfg.lr, cfg.weight_decay)
        self.critic_opt = Adam(self.critics[0].arrays() + self.critics[1].arrays(),
                               cfg.lr, cfg.weight_decay)
        self.alpha_opt = Adam([self.log_alpha], cfg.lr)
        self._sync_cpg()

    @property
    def alpha(self) -> float:
        return max(math.exp(float(self.log_alpha[0])), ALPHA_FLOOR)

    def _sync_cpg(self) -> None:
        np.fill_diagonal(self.eps, 0.0)
        np.fill_diagonal(self.phi, 0.0)
        self.policy.cpg = self.policy.cpg.replace(eps=self.eps, phi=self.phi)

    def _cpg_state_from(self, s_raw: np.ndarray) -> CpgState:
        return CpgState(theta=s_raw[:, self.layout.theta].astype(float),
                        r=s_raw[:, self.layout.r].astype(float))

    def update(self, batch: dict) -> UpdateStats:
        cfg = self.cfg
        pol = self.policy
        dtype = pol.mlp.weights[0].dtype
        b, n = batch["u"].shape
        x = pol.normalizer(batch["s"]).astype(dtype)
        x_next = pol.normalizer(batch["s_next"]).astype(dtype)
        x_hat = (x + cfg.perturbation_std * self.rng.standard_normal(x.shape)).astype(dtype)
        alpha = self.alpha

        actor_batch = ActorBatch(x=x, x_next=x_next, x_perturbed=x_hat,
                                 cpg_state=self._cpg_state_from(batch["s"]),
                                 goal=batch["s"][:, self.layout.goal].astype(float),
                                 noise=self.rng.standard_normal((b, n)))
        # the policy is unchanged until the actor step, so one stacked pass
        # serves both the next-action sample and the actor loss
        forward = stacked_forward(pol.mlp, actor_batch)

        # critic regression toward the soft Bellman target
        head_next = squash_head(forward[0][b:2 * b], pol.fixed_f)
        out_next = cpg_step(self._cpg_state_from(batch["s_next"]), pol.cpg,
                            _as_signals(head_next.fb), validate=False)
        noise_next = self.rng.standard_normal((b, n))
        sigma_next = np.asarray(head_next.sigma, dtype=float)
        u_next = out_next.psi + sigma_next * noise_next
        logp_next = gaussian_tanh_log_prob(noise_next, sigma_next, u_next)
        y = critic_targets(self.targets, x_next, np.tanh(u_next), logp_next,
                           batch["r"].astype(float), batch["done"].astype(float),
                           alpha, cfg.discount)
        c_loss, c_grads = critic_loss(self.critics, x, np.tanh(batch["u"]), y)
        if not math.isfinite(c_loss):
            raise TrainingAborted(f"non-finite critic loss {c_loss}")
        self.critic_opt.step(c_grads[0].arrays() + c_grads[1].arrays())

        # actor through the updated critics
        lambdas = (cfg.lambda_temporal, cfg.lambda_spatial, cfg.effective_lambda_frequency)
        try:
            terms, grads = actor_loss(pol.mlp, pol.cpg, self.critics, alpha, actor_batch,
                                      lambdas, pol.fixed_f, forward=forward)
        except CpgDomainError as exc:
            raise TrainingAborted(f"non-finite actor gradient: {exc}") from exc
        if not math.isfinite(terms.total):
            raise TrainingAborted(f"non-finite actor loss {terms.total}")
        actor_grads = grads.mlp.arrays()
        if cfg.learn_coupling:
            actor_grads = actor_grads + [grads.eps, grads.phi]
        self.actor_opt.step(actor_grads)
        self._sync_cpg()

        g_log_alpha = temperature_gradient(float(self.log_alpha[0]), terms.log_prob,
                                           self.target_entropy)
        self.alpha_opt.step([np.array([g_log_alpha])])
        self.log_alpha[0] = max(self.log_alpha[0], math.log(ALPHA_FLOOR))

        for target, online in zip(self.targets, self.critics):
            polyak_update(target, online, cfg.target_smoothing)
        return UpdateStats(critic_loss=c_loss, actor=terms, alpha=alpha)


# ---------------------------------------------------------------------------
# training loop

@dataclass
class EpisodeLog:
    ret: float = 0.0
    length: int = 0
    f_sum: float = 0.0
    f_ref_sum: float = 0.0
    losses: list = field(default_factory=list)


def _write_csv_row(path: Path, row: dict, header: tuple) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header)
        if new:
            writer.writeheader()
        writer.writerow(row)


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def train(cfg: SacConfig, env_cfg: EnvConfig | None = None, seed: int = 0,
          total_steps: int = 200_000, out_dir: str | Path | None = None,
          workers: int = 1) -> dict:
    """Run SAC on the reduced-order environment.

    Writes ``metrics.csv`` (one row per finished episode), checkpoints and a
    config echo under ``out_dir``. Returns a summary dict with the episode
    returns. ``workers`` environments are stepped in turn by this thread.
    """
    from .checkpoint import save_checkpoint

    env_cfg = env_cfg or EnvConfig(seed=seed)
    root = np.random.SeedSequence(seed)
    agent_seq, buffer_seq, *env_seqs = root.spawn(2 + workers)
    agent = SacAgent(cfg, np.random.default_rng(agent_seq))
    layout = agent.layout
    buffer = ReplayBuffer(min(cfg.replay_capacity, max(total_steps, 1)), layout.dim,
                          agent.policy.cpg.n, np.random.default_rng(buffer_seq))
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        metrics_path = out / "metrics.csv"
        if metrics_path.exists():
            metrics_path.unlink()
        (out / "config.json").write_text(json.dumps(
            {"schema_version": METRICS_SCHEMA_VERSION, "seed": seed, "total_steps": total_steps,
             "workers": workers, "sac": asdict(cfg), "env": asdict(env_cfg)},
            indent=2, sort_keys=True, default=str))
        save_checkpoint(agent.policy, out / "checkpoint_000000000")

    envs = []
    for seq in env_seqs:
        rng = np.random.default_rng(seq)
        env = QuadrupedEnv(env_cfg)
        envs.append({"env": env, "rng": rng, "noise": np.random.default_rng(rng.integers(2**63))})

    def start_episode(slot):
        env, rng = slot["env"], slot["rng"]
        robot, cpg, goal = env.reset(rng)
        filt = FilterState.create()
        obs, filt = assemble_observation(robot, goal, cpg, filt, agent.policy.normalizer)
        slot.update(cpg=cpg, filt=filt, obs=obs.vector, log=EpisodeLog())

    for slot in envs:
        start_episode(slot)

    returns, statuses = [], []
    episode = 0
    step = 0
    while step < total_steps:
        for slot in envs:
            if step >= total_steps:
                break
            env, pol = slot["env"], agent.policy
            s = slot["obs"]
            res = act(pol, s, slot["cpg"], Mode.STOCHASTIC, slot["noise"])
            q_cmd, filt = filter_action(slot["filt"], res.command.q_hat)
            sr = env.step(q_cmd)
            obs_next, filt = assemble_observation(sr.state, env.goal, res.cpg_state, filt,
                                                  pol.normalizer)
            s_next = obs_next.vector
            done = sr.status is Status.FAIL
            buffer.add(Transition(s=s, u=res.u, r=sr.reward.total, s_next=s_next, done=done,
                                  chi=res.fb.chi, f=float(res.fb.f)))
            ep = slot["log"]
            ep.ret += sr.reward.total
            ep.length += 1
            ep.f_sum += float(res.fb.f)
            ep.f_ref_sum += float(frequency_reference(env.goal.as_array()))
            slot.update(cpg=res.cpg_state, filt=filt, obs=s_next)
            step += 1

            if step > cfg.warmup_steps and len(buffer) >= cfg.batch_size:
                for _ in range(cfg.updates_per_step):
                    batch = buffer.sample(cfg.batch_size)
                    try:
                        stats = agent.update(batch)
                    except TrainingAborted:
                        if out is not None:
                            np.savez(out / "aborted_batch.npz", **batch)
                        raise
                    ep.losses.append((stats.critic_loss, stats.actor.total, stats.actor.temporal,
                                      stats.actor.spatial, stats.actor.frequency))

            if sr.status is not Status.CONTINUE:
                returns.append(ep.ret)
                statuses.append(sr.status.value)
                losses = np.mean(ep.losses, axis=0) if ep.losses else np.full(5, np.nan)
                row = {
                    "schema_version": METRICS_SCHEMA_VERSION, "step": step, "episode": episode,
                    "return": ep.ret, "length": ep.length, "status": sr.status.value,
                    "critic_loss": losses[0], "actor_loss": losses[1],
                    "loss_temporal": losses[2], "loss_spatial": losses[3],
                    "loss_frequency": losses[4], "alpha": agent.alpha,
                    "mean_f": ep.f_sum / ep.length, "mean_f_ref": ep.f_ref_sum / ep.length,
                }
                if out is not None:
                    _write_csv_row(metrics_path, {k: _fmt(v) for k, v in row.items()},
                                   METRICS_COLUMNS)
                log.info("episode %d step %d return %.2f (%s)", episode, step, ep.ret,
                         sr.status.value)
                episode += 1
                start_episode(slot)

            if out is not None and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                save_checkpoint(agent.policy, out / f"checkpoint_{step:09d}")

    if out is not None and total_steps > 0:
        save_checkpoint(agent.policy, out / "checkpoint_final")
    return {"returns": returns, "statuses": statuses, "agent": agent, "steps": step}
