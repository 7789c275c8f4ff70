"""Batch front-end: ``python -m mlpcpg --mode train|rollout|follow|analyze``.

Configuration files hold flat dotted keys, one ``key = value`` per line,
``#`` starts a comment. Values are Python literals or bare strings::

    run.mode = train
    run.seed = 3
    sac.batch_size = 64
    env.time_limit = 5.0

Command-line flags override file values. Exit codes: 0 success, 1 user
error (bad config, missing file), 2 runtime abort (non-finite loss).
Log verbosity comes from ``MLPCPG_LOG_LEVEL`` (default ``INFO``).
"""

from __future__ import annotations

import argparse
import ast
import json
import logging
import os
import subprocess
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .env import EnvConfig, Goal
from .sac import FREQ_MODES, SacConfig, TrainingAborted

log = logging.getLogger("mlpcpg")

MANIFEST_SCHEMA_VERSION = 1
MODES = ("train", "rollout", "follow", "analyze")

RUN_DEFAULTS = {
    "run.mode": "train",
    "run.seed": 0,
    "run.out": "runs/out",
    "run.checkpoint": None,
    "run.freq_mode": "adaptive-curve",
    "run.workers": 1,
    "run.steps": 200_000,
    "rollout.velocities": (1.0, 2.0, 3.0),
    "rollout.seconds": 10.0,
    "follow.path": "square",
    "follow.scale": 2.0,
    "follow.period": 40.0,
    "follow.lead": 1.0,
    "analyze.input": None,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _literal(text: str):
    text = text.strip()
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        out[key] = _literal(value)
    return out


def format_config(values: dict) -> str:
    lines = []
    for key in sorted(values):
        v = values[key]
        lines.append(f"{key} = {v!r}" if not isinstance(v, str) else f"{key} = {v}")
    return "\n".join(lines) + "\n"


def _dataclass_section(cls, values: dict, prefix: str):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in values.items():
        if not key.startswith(prefix + "."):
            continue
        name = key[len(prefix) + 1:]
        if name not in known:
            raise ConfigError(f"unknown field {key!r}")
        kwargs[name] = tuple(value) if isinstance(value, list) else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {prefix} config: {exc}") from exc


def resolve(values: dict) -> dict:
    """Validate keys and fill defaults; returns the full flat configuration."""
    prefixes = ("run.", "rollout.", "follow.", "analyze.", "sac.", "env.")
    for key in values:
        if not key.startswith(prefixes):
            raise ConfigError(f"unknown field {key!r}")
        if key.startswith(prefixes[:4]) and key not in RUN_DEFAULTS:
            raise ConfigError(f"unknown field {key!r}")
    full = dict(RUN_DEFAULTS)
    full.update(values)
    if full["run.mode"] not in MODES:
        raise ConfigError(f"field 'run.mode' must be one of {MODES}, got {full['run.mode']!r}")
    if full["run.freq_mode"] not in FREQ_MODES:
        raise ConfigError(f"field 'run.freq_mode' must be one of {FREQ_MODES}")
    for key in ("run.seed", "run.workers", "run.steps"):
        if not isinstance(full[key], int) or full[key] < (1 if key == "run.workers" else 0):
            raise ConfigError(f"field {key!r} must be a non-negative integer")
    if "sac.freq_mode" in values and values["sac.freq_mode"] != full["run.freq_mode"]:
        raise ConfigError("field 'sac.freq_mode' conflicts with 'run.freq_mode'")
    mode = full["run.mode"]
    if mode in ("rollout", "follow") and not full["run.checkpoint"]:
        raise ConfigError(f"field 'run.checkpoint' is required in {mode} mode")
    return full


def sac_config(full: dict) -> SacConfig:
    values = {k: v for k, v in full.items() if k.startswith("sac.")}
    values["sac.freq_mode"] = full["run.freq_mode"]
    return _dataclass_section(SacConfig, values, "sac")


def env_config(full: dict) -> EnvConfig:
    values = {k: v for k, v in full.items() if k.startswith("env.")}
    values.setdefault("env.seed", full["run.seed"])
    return _dataclass_section(EnvConfig, values, "env")


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_manifest(out: Path, full: dict, extra: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved.cfg").write_text(format_config(full))
    manifest = {"schema_version": MANIFEST_SCHEMA_VERSION, "version": __version__,
                "git": git_describe(), "seed": full["run.seed"], "mode": full["run.mode"],
                "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in full.items()}}
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                  default=str))


# ---------------------------------------------------------------------------
# modes

def _load_policy(full: dict):
    from .checkpoint import load_checkpoint
    path = Path(full["run.checkpoint"])
    if not (path / "manifest.json").is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    policy = load_checkpoint(path)
    if full["run.freq_mode"].startswith("fixed-"):
        policy.fixed_f = float(full["run.freq_mode"].split("-", 1)[1])
    return policy


def run_train(full: dict, out: Path) -> dict:
    from .sac import train
    cfg = sac_config(full)
    result = train(cfg, env_config(full), seed=full["run.seed"], total_steps=full["run.steps"],
                   out_dir=out, workers=full["run.workers"])
    return {"episodes": len(result["returns"]), "steps": result["steps"]}


def run_rollout(full: dict, out: Path) -> dict:
    from .rollout import rollout
    policy = _load_policy(full)
    written = []
    for v in full["rollout.velocities"]:
        ep = rollout(policy, Goal(vx=float(v)), float(full["rollout.seconds"]),
                     seed=full["run.seed"], env_cfg=env_config(full))
        written.append(str(ep.recorder.write(out / f"trajectory_v{float(v):.2f}.csv").name))
        log.info("rollout v=%.2f return %.2f (%s)", v, ep.ret, ep.status.value)
    return {"trajectories": written}


def run_follow(full: dict, out: Path) -> dict:
    from .rollout import TrajectorySpec, follow, write_follow_csv
    try:
        spec = TrajectorySpec(full["follow.path"], float(full["follow.scale"]),
                              float(full["follow.period"]))
    except ValueError as exc:
        raise ConfigError(f"invalid follow spec: {exc}") from exc
    policy = _load_policy(full)
    rows = follow(policy, spec, float(full["follow.lead"]), full["run.seed"], env_config(full))
    write_follow_csv(out / f"follow_{spec.name}.csv", rows)
    if len(rows):
        err = float(np.mean(np.abs(rows[:, 10] - rows[:, 7])))
        log.info("follow %s: mean |vx - vx_cmd| = %.3f m/s", spec.name, err)
    return {"rows": len(rows)}


def run_analyze(full: dict, out: Path) -> dict:
    from .gait import analyze, metrics_row, write_figure_data, write_rows, METRICS_COLUMNS
    from .trajlog import read_trajectory_csv
    src = Path(full["analyze.input"] or out)
    files = sorted(src.glob("trajectory_*.csv")) if src.is_dir() else [src]
    if not files or not all(f.is_file() for f in files):
        raise FileNotFoundError(f"no trajectory logs found at {src}")
    runs = {f.stem: analyze(read_trajectory_csv(f)) for f in files}
    write_rows(out / "metrics.csv", [metrics_row(k, m) for k, m in runs.items()],
               METRICS_COLUMNS)
    write_figure_data(out / "figures", runs)
    return {"analyzed": [f.name for f in files]}


RUNNERS = {"train": run_train, "rollout": run_rollout, "follow": run_follow,
           "analyze": run_analyze}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlpcpg", description=__doc__.split("\n")[0])
    p.add_argument("--config", type=Path, help="flat dotted key = value file")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--freq-mode", choices=FREQ_MODES)
    p.add_argument("--workers", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--input", type=Path, help="trajectory log or directory (analyze mode)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("MLPCPG_LOG_LEVEL", "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = {}
        if args.config is not None:
            if not args.config.is_file():
                raise FileNotFoundError(f"config file not found: {args.config}")
            values.update(parse_config_text(args.config.read_text(), str(args.config)))
        for item in args.set:
            values.update(parse_config_text(item, "--set"))
        flags = {"run.mode": args.mode, "run.seed": args.seed, "run.out": args.out,
                 "run.checkpoint": args.checkpoint, "run.freq_mode": args.freq_mode,
                 "run.workers": args.workers, "run.steps": args.steps,
                 "analyze.input": args.input}
        values.update({k: (str(v) if isinstance(v, Path) else v)
                       for k, v in flags.items() if v is not None})
        full = resolve(values)
        out = Path(full["run.out"])
        write_manifest(out, full)
        summary = RUNNERS[full["run.mode"]](full, out)
        write_manifest(out, full, {"result": summary})
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingAborted, FloatingPointError) as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2
    return 0

