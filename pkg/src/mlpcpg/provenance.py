"""Content digest of the modules that determine training results.

Cached desk-run artifacts record this digest; a mismatch means the training
code changed after the artifacts were produced.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

TRAINING_MODULES = ("cpg", "grad", "mlp", "policy", "env", "_dynamics", "reward", "filters",
                    "control", "kinematics", "sac", "checkpoint", "freqcurve")


def training_source_digest() -> str:
    root = Path(__file__).resolve().parent
    h = hashlib.sha256()
    for name in TRAINING_MODULES:
        h.update(name.encode())
        h.update((root / f"{name}.py").read_bytes())
    return h.hexdigest()
