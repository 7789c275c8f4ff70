import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mlpcpg.control import (PD_TICKS_PER_POLICY_TICK, Q_MAX, Q_MIN, TORQUE_LIMIT, PdConfig,
                            limits_to_unit, pd_torque, squash_to_limits)

vec = arrays(np.float64, 12, elements=st.floats(-3, 3))


def test_clock_ratio():
    assert PD_TICKS_PER_POLICY_TICK == 40


def test_limit_table():
    np.testing.assert_array_equal(TORQUE_LIMIT[:3], [75, 75, 130])
    np.testing.assert_array_equal(Q_MIN[:3], [-0.523, -2.792, 0.698])
    np.testing.assert_array_equal(Q_MAX[:3], [0.523, 0.349, 2.792])


def test_pd_matches_law_inside_limits():
    q_hat, q, qd = np.full(12, 0.1), np.zeros(12), np.full(12, 0.5)
    tau = pd_torque(PdConfig(), q_hat, q, qd)
    np.testing.assert_array_equal(tau, 300 * 0.1 - 10 * 0.5)


@given(vec, vec, arrays(np.float64, 12, elements=st.floats(-20, 20)))
def test_pd_is_clipped_law(q_hat, q, qd):
    tau = pd_torque(PdConfig(), q_hat, q, qd)
    raw = 300.0 * (q_hat - q) - 10.0 * qd
    np.testing.assert_array_equal(tau, np.clip(raw, -TORQUE_LIMIT, TORQUE_LIMIT))


def test_squash_endpoints_and_inverse():
    np.testing.assert_allclose(squash_to_limits(-np.ones(12)), Q_MIN)
    np.testing.assert_allclose(squash_to_limits(np.ones(12)), Q_MAX)
    a = np.linspace(-1, 1, 12)
    np.testing.assert_allclose(limits_to_unit(squash_to_limits(a)), a, atol=1e-12)


def test_gains_must_be_positive():
    with pytest.raises(ValueError):
        PdConfig(kp=0.0)
