"""A walk through the oscillator network on its own, with no learning.

1. A single oscillator settles onto its limit cycle.
2. Two coupled oscillators with a phase bias of pi lock in antiphase.
3. The twelve-joint network, started from random phases, falls into a trot.
4. Each feedback channel nudges the output in its own way.
"""

import numpy as np

from mlpcpg.cpg import (CpgParams, CpgState, FeedbackSignals, cpg_step, default_params,
                        wrap_phase)


def settle(params, state, fb, seconds):
    for _ in range(int(round(seconds / params.dt))):
        state = cpg_step(state, params, fb).new_state
    return state


def single_oscillator():
    p = CpgParams(eps=np.zeros((1, 1)), phi=np.zeros((1, 1)), eta=[0.8], offset=[0.0])
    s = CpgState(np.zeros(1), np.full(1, 0.1))
    fb = FeedbackSignals.constant(1, 1.5)
    print("single oscillator, r0 = 0.1, eta = 0.8")
    for t in (0.2, 0.4, 1.0, 3.0):
        s1 = settle(p, s, fb, t)
        print(f"  t = {t:3.1f} s  r = {s1.r[0]:.4f}")


def antiphase_pair():
    p = CpgParams(eps=np.full((2, 2), 6.0), phi=np.array([[0, np.pi], [-np.pi, 0]]),
                  eta=[0.8, 0.8], offset=[0.0, 0.0])
    rng = np.random.default_rng(0)
    s = CpgState(rng.uniform(0, 2 * np.pi, 2), np.full(2, 0.8))
    s = settle(p, s, FeedbackSignals.constant(2, 1.0), 5.0)
    d = np.angle(np.exp(1j * (s.theta[1] - s.theta[0])))
    print(f"\ncoupled pair after 5 s: phase difference {d:+.6f} rad (pi = {np.pi:.6f})")


def trot_network():
    p = default_params()
    rng = np.random.default_rng(1)
    s = CpgState(rng.uniform(0, 2 * np.pi, 12), rng.uniform(0.1, 0.8, 12))
    s = settle(p, s, FeedbackSignals.constant(12, 1.5), 5.0)
    hips = wrap_phase(s.theta[1::3] - s.theta[1])
    print("\ntwelve-joint network after 5 s, hip pitch phases relative to FL (rad):")
    for leg, ph in zip(("FL", "FR", "RL", "RR"), hips):
        print(f"  {leg}: {ph:.3f}")


def feedback_channels():
    p = CpgParams(eps=np.zeros((1, 1)), phi=np.zeros((1, 1)), eta=[0.8], offset=[0.0])
    s = CpgState(np.zeros(1), np.full(1, 0.8))
    base = FeedbackSignals.constant(1, 1.5)
    print("\none step from r = 0.8, theta = 0 (psi is the joint command before squashing):")
    cases = {
        "none": base,
        "kappa = 0.5": FeedbackSignals(1.5, [0.5], [0.0], [0.0]),
        "xi = 2 pi": FeedbackSignals(1.5, [0.0], [2 * np.pi], [0.0]),
        "chi = 0.3": FeedbackSignals(1.5, [0.0], [0.0], [0.3]),
    }
    for name, fb in cases.items():
        out = cpg_step(s, p, fb)
        print(f"  {name:12s} theta' {out.new_state.theta[0]:.3f}  r' {out.new_state.r[0]:.3f}"
              f"  psi {out.psi[0]:+.3f}")


if __name__ == "__main__":
    single_oscillator()
    antiphase_pair()
    trot_network()
    feedback_channels()
