import json

import numpy as np
import pytest

from mlpcpg.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from mlpcpg.cpg import CpgState
from mlpcpg.policy import MlpCpgPolicy, Mode, act


def _policy(dtype=np.float32, fixed_f=None):
    rng = np.random.default_rng(0)
    pol = MlpCpgPolicy.create(rng, hidden=(16, 16), fixed_f=fixed_f, dtype=dtype)
    pol.normalizer.update(rng.normal(size=(20, pol.layout.dim)))
    return pol


def test_round_trip_is_exact(tmp_path):
    pol = _policy()
    loaded = load_checkpoint(save_checkpoint(pol, tmp_path / "ck"))
    for a, b in zip(pol.mlp.arrays(), loaded.mlp.arrays()):
        assert a.dtype == b.dtype
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(pol.cpg.phi, loaded.cpg.phi)
    np.testing.assert_array_equal(pol.normalizer.mean, loaded.normalizer.mean)
    assert loaded.normalizer.frozen and loaded.normalizer.count == pol.normalizer.count


def test_loaded_policy_acts_identically(tmp_path):
    pol = _policy(np.float64, fixed_f=1.5)
    loaded = load_checkpoint(save_checkpoint(pol, tmp_path / "ck"))
    obs = np.random.default_rng(1).normal(size=pol.layout.dim)
    state = CpgState(np.linspace(0, 6, 12), np.full(12, 0.5))
    a = act(pol, obs, state, Mode.DETERMINISTIC)
    b = act(loaded, obs, state, Mode.DETERMINISTIC)
    np.testing.assert_array_equal(a.u, b.u)
    assert loaded.fixed_f == 1.5


def test_manifest_records_layout(tmp_path):
    path = save_checkpoint(_policy(), tmp_path / "ck")
    manifest = json.loads((path / "manifest.json").read_text())
    assert manifest["format_version"] == 1 and manifest["byte_order"] == "<f8"
    total = sum(e["nbytes"] for e in manifest["arrays"])
    assert total == (path / "arrays.bin").stat().st_size


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError, match="checkpoint not found"):
        load_checkpoint(tmp_path / "nope")


def test_corruption_detected(tmp_path):
    path = save_checkpoint(_policy(), tmp_path / "ck")
    blob = bytearray((path / "arrays.bin").read_bytes())
    blob[10] ^= 0xFF
    (path / "arrays.bin").write_bytes(bytes(blob))
    with pytest.raises(CheckpointError, match="hash"):
        load_checkpoint(path)


def test_version_mismatch(tmp_path):
    path = save_checkpoint(_policy(), tmp_path / "ck")
    manifest = json.loads((path / "manifest.json").read_text())
    manifest["format_version"] = 99
    (path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(path)
