import numpy as np
import pytest

from mlpcpg.env import EnvConfig, Goal
from mlpcpg.policy import MlpCpgPolicy
from mlpcpg.rollout import (FOLLOW_COLUMNS, PATHS, TrajectorySpec, command_profile, follow,
                            frequency_by_speed, path_point, rollout, target_to_command,
                            to_base_frame)


@pytest.fixture(scope="module")
def policy():
    return MlpCpgPolicy.create(np.random.default_rng(0), hidden=(16, 16))


def test_target_to_command_examples():
    np.testing.assert_array_equal(target_to_command([0.0, 0.0]), [0, 0, 0])
    np.testing.assert_allclose(target_to_command([1.0, 0.0]), [1.0, 0.0, 0.0])
    # a target to the left turns left (positive yaw rate)
    cmd = target_to_command([1.0, 0.5])
    assert cmd[1] == 0.5 and cmd[2] == pytest.approx(np.arctan2(0.5, 1.0))
    # behind and to the right: turn right, clipped components
    cmd = target_to_command([-3.0, -2.0])
    np.testing.assert_allclose(cmd, [-1.0, -0.75, -1.0])
    assert target_to_command([10.0, 0.0])[0] == 4.0


def test_base_frame_rotation():
    np.testing.assert_allclose(to_base_frame([1.0, 1.0], [0.0, 0.0], np.pi / 2), [1.0, -1.0],
                               atol=1e-12)


@pytest.mark.parametrize("name", PATHS)
def test_paths_start_at_origin_and_are_bounded(name):
    spec = TrajectorySpec(name, 2.0, 40.0)
    np.testing.assert_allclose(path_point(spec, 0.0), [0.0, 0.0], atol=1e-12)
    pts = path_point(spec, np.linspace(0, 1, 400))
    assert np.all(np.isfinite(pts)) and np.max(np.abs(pts)) <= 4.0 + 1e-9


def test_closed_paths_return_to_origin():
    for name in ("square", "eight", "clover"):
        np.testing.assert_allclose(path_point(TrajectorySpec(name), 1.0), [0, 0], atol=1e-9)


def test_square_has_four_heading_changes():
    # the target runs on around the closed loop, so the last corner shows up too
    prof = command_profile(TrajectorySpec("square", 2.0, 40.0), lead=1.0)
    turning = np.abs(prof[:, 3]) > 0.3
    onsets = np.flatnonzero(turning[1:] & ~turning[:-1]) + 1
    assert not turning[0]
    assert len(onsets) == 4
    np.testing.assert_allclose(prof[onsets, 0], [9.0, 19.0, 29.0, 39.0], atol=0.5)


def test_invalid_spec():
    with pytest.raises(ValueError):
        TrajectorySpec("spiral")
    with pytest.raises(ValueError):
        TrajectorySpec("square", scale=-1.0)
    with pytest.raises(ValueError):
        TrajectorySpec("square", period=0.0)


def test_empty_path_gives_empty_log(policy):
    rows = follow(policy, TrajectorySpec("line", 0.0))
    assert rows.shape == (0, len(FOLLOW_COLUMNS))


def test_follow_logs_commands(policy):
    rows = follow(policy, TrajectorySpec("line", 1.0, 2.0), seed=0)
    assert rows.shape[1] == len(FOLLOW_COLUMNS) and len(rows) > 0
    assert np.all(rows[:, 0] == 1)


def test_rollout_is_deterministic_and_keeps_normalizer(policy):
    before = policy.normalizer.mean.copy()
    a = rollout(policy, Goal(vx=1.0), seconds=1.0, seed=3)
    b = rollout(policy, Goal(vx=1.0), seconds=1.0, seed=3)
    np.testing.assert_array_equal(a.log.q, b.log.q)
    np.testing.assert_array_equal(policy.normalizer.mean, before)
    assert len(a.log) == 26 or a.status.value == "fail"


def test_fixed_frequency_rollout_logs_pinned_f():
    pol = MlpCpgPolicy.create(np.random.default_rng(1), hidden=(8,), fixed_f=3.0)
    ep = rollout(pol, Goal(vx=2.0), seconds=1.0)
    assert np.all(ep.log.f[1:] == 3.0)


def test_frequency_by_speed_keys(policy):
    out = frequency_by_speed(policy, [1.0, 2.0], seconds=0.5, seeds=(0,),
                             env_cfg=EnvConfig())
    assert set(out) == {1.0, 2.0} and all(0 <= f <= 3 for f in out.values())
