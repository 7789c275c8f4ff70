"""Why the network trains without backpropagation through time.

The oscillator state (theta, r) enters each step as an input and leaves as an
output, so the gradient of a loss at step t only needs the Jacobian of that
one step. This script compares the hand-derived vector-Jacobian product with
central differences, first for one step and then for the whole actor loss.
"""

import numpy as np

from mlpcpg.cpg import CpgParams, CpgState, FeedbackSignals
from mlpcpg.grad import CpgUpstream, cpg_step_backward, finite_diff_jacobian, relative_error
from mlpcpg.cpg import cpg_step


def one_step():
    rng = np.random.default_rng(3)
    n = 12
    params = CpgParams(eps=rng.uniform(-2, 2, (n, n)), phi=rng.uniform(-np.pi, np.pi, (n, n)),
                       eta=np.full(n, 0.8), offset=np.zeros(n))
    state = CpgState(rng.uniform(0, 2 * np.pi, n), rng.uniform(0.2, 1.0, n))
    fb = FeedbackSignals(1.7, rng.uniform(-1, 1, n), rng.uniform(-1, 1, n),
                         rng.uniform(-0.5, 0.5, n))
    w = rng.normal(size=n)              # loss = w . psi
    g = cpg_step_backward(state, params, fb, CpgUpstream(np.zeros(n), np.zeros(n), w))

    def loss_of_chi(chi):
        return np.array([w @ cpg_step(state, params, FeedbackSignals(fb.f, fb.kappa, fb.xi,
                                                                     chi)).psi])

    def loss_of_theta(theta):
        return np.array([w @ cpg_step(CpgState(theta, state.r), params, fb).psi])

    for name, analytic, fn, x0 in (("chi", g.chi, loss_of_chi, fb.chi),
                                   ("theta", g.theta, loss_of_theta, state.theta)):
        numeric = finite_diff_jacobian(fn, x0, 1e-6)[0]
        print(f"d loss / d {name:5s}: relative error {relative_error(analytic, numeric):.2e}")


def actor_graph():
    import sys
    from pathlib import Path
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
    from gradharness import actor_graph_error, micro_actor_case

    rng = np.random.default_rng(4)
    errs = [actor_graph_error(micro_actor_case(rng)) for _ in range(5)]
    print("actor loss over MLP weights, eps and phi: worst relative error "
          f"{max(errs):.2e} over {len(errs)} random micro-policies")


if __name__ == "__main__":
    one_step()
    actor_graph()
