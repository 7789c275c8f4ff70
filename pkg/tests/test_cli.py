import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mlpcpg import cli
from mlpcpg.checkpoint import save_checkpoint
from mlpcpg.policy import MlpCpgPolicy
from mlpcpg.sac import SacAgent, TrainingAborted

TINY = ["--set", "sac.hidden=(16, 16)", "--set", "sac.critic_hidden=(16, 16)",
        "--set", "sac.batch_size=16", "--set", "sac.warmup_steps=20",
        "--set", "sac.updates_per_step=1", "--set", "env.time_limit=1.0"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "policy"
    save_checkpoint(MlpCpgPolicy.create(np.random.default_rng(0), hidden=(16, 16)), path)
    return path


def test_parse_config_text():
    values = cli.parse_config_text("run.seed = 3  # comment\n\nsac.hidden = (8, 8)\n"
                                   "run.freq_mode = fixed-1.5\n")
    assert values == {"run.seed": 3, "sac.hidden": (8, 8), "run.freq_mode": "fixed-1.5"}
    with pytest.raises(cli.ConfigError, match=":1:"):
        cli.parse_config_text("nonsense")


@pytest.mark.parametrize("key,value", [("sac.batch_sizee", "3"), ("run.sed", "1"),
                                       ("rollout.speed", "2"), ("bogus.key", "1")])
def test_unknown_field_is_named(tmp_path, capsys, key, value):
    code = cli.main(["--out", str(tmp_path), "--set", f"{key}={value}", "--steps", "0"])
    assert code == 1
    assert key in capsys.readouterr().err


def test_invalid_value_is_named(tmp_path, capsys):
    assert cli.main(["--out", str(tmp_path), "--set", "sac.discount=2.0", "--steps", "0"]) == 1
    err = capsys.readouterr().err
    assert "sac" in err and "discount" in err
    assert cli.main(["--out", str(tmp_path), "--set", "run.seed=-1"]) == 1
    assert "run.seed" in capsys.readouterr().err


def test_rollout_missing_checkpoint(tmp_path, capsys):
    code = cli.main(["--mode", "rollout", "--out", str(tmp_path),
                     "--checkpoint", str(tmp_path / "missing")])
    assert code == 1
    assert "checkpoint not found" in capsys.readouterr().err


def test_rollout_requires_checkpoint(tmp_path, capsys):
    assert cli.main(["--mode", "rollout", "--out", str(tmp_path)]) == 1
    assert "run.checkpoint" in capsys.readouterr().err


def test_train_fixed_frequency_and_manifest(tmp_path):
    out = tmp_path / "train"
    code = cli.main(["--mode", "train", "--freq-mode", "fixed-1.5", "--seed", "4",
                     "--steps", "60", "--out", str(out), *TINY])
    assert code == 0
    rows = _rows(out / "metrics.csv")
    assert rows and all(float(r["mean_f"]) == 1.5 for r in rows)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["schema_version"] == 1
    assert "git" in manifest and manifest["result"]["steps"] == 60
    assert (out / "resolved.cfg").is_file()
    assert (out / "checkpoint_final" / "manifest.json").is_file()


def test_manifest_round_trip_reproduces_outputs(tmp_path):
    first = tmp_path / "first"
    assert cli.main(["--steps", "50", "--seed", "2", "--out", str(first), *TINY]) == 0
    second = tmp_path / "second"
    assert cli.main(["--config", str(first / "resolved.cfg"), "--out", str(second)]) == 0
    assert (first / "metrics.csv").read_bytes() == (second / "metrics.csv").read_bytes()


def test_rollout_then_analyze(tmp_path, checkpoint):
    out = tmp_path / "eval"
    code = cli.main(["--mode", "rollout", "--checkpoint", str(checkpoint), "--out", str(out),
                     "--set", "rollout.velocities=(1.0, 2.0)", "--set", "rollout.seconds=3.0"])
    assert code == 0
    logs = sorted(p.name for p in out.glob("trajectory_*.csv"))
    assert logs == ["trajectory_v1.00.csv", "trajectory_v2.00.csv"]
    assert cli.main(["--mode", "analyze", "--input", str(out), "--out", str(out)]) == 0
    rows = _rows(out / "metrics.csv")
    assert len(rows) == 2
    for col in ("schema_version", "v", "f", "step_length", "cot"):
        assert col in rows[0]
    assert (out / "figures" / "frequency_velocity.csv").is_file()


def test_analyze_missing_input(tmp_path, capsys):
    assert cli.main(["--mode", "analyze", "--input", str(tmp_path / "none.csv"),
                     "--out", str(tmp_path)]) == 1
    assert "no trajectory logs" in capsys.readouterr().err


def test_follow_modes(tmp_path, checkpoint):
    out = tmp_path / "follow"
    assert cli.main(["--mode", "follow", "--checkpoint", str(checkpoint), "--out", str(out),
                     "--set", "follow.path=line", "--set", "follow.period=2.0"]) == 0
    rows = _rows(out / "follow_line.csv")
    assert rows and rows[0]["schema_version"] == "1.0"
    assert cli.main(["--mode", "follow", "--checkpoint", str(checkpoint), "--out", str(out),
                     "--set", "follow.path=square", "--set", "follow.scale=0.0"]) == 0
    assert _rows(out / "follow_square.csv") == []
    assert cli.main(["--mode", "follow", "--checkpoint", str(checkpoint), "--out", str(out),
                     "--set", "follow.path=spiral"]) == 1


def test_runtime_abort_exit_code(tmp_path, monkeypatch, capsys):
    def boom(self, batch):
        raise TrainingAborted("loss is nan")

    monkeypatch.setattr(SacAgent, "update", boom)
    assert cli.main(["--steps", "40", "--out", str(tmp_path), *TINY]) == 2
    assert "loss is nan" in capsys.readouterr().err
    assert (tmp_path / "aborted_batch.npz").is_file()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mlpcpg", "--mode", "rollout",
                           "--checkpoint", str(tmp_path / "x"), "--out", str(tmp_path)],
                          capture_output=True, text=True, env={"MLPCPG_LOG_LEVEL": "ERROR",
                                                                "PATH": "/usr/bin:/bin"})
    assert proc.returncode == 1
    assert "checkpoint not found" in proc.stderr
