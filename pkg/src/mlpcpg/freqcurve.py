"""Velocity-to-step-frequency reference curve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FrequencyCurve:
    """``f = a + b ln(v + c)``; ``c = 0`` gives the plain logarithmic law."""

    a: float
    b: float
    c: float = 0.0

    def raw(self, v):
        return self.a + self.b * np.log(np.asarray(v, dtype=float) + self.c)

    def __call__(self, v):
        return np.maximum(0.0, self.raw(v))


REFERENCE_CURVE = FrequencyCurve(a=1.066, b=0.876, c=0.289)
ANIMAL_CURVE = FrequencyCurve(a=1.314, b=0.762, c=0.0)


def f_ref(v):
    """Reference step frequency (Hz) for a locomotion speed ``v`` (m/s), floored at 0."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("speed must be finite")
    if np.any(v < 0):
        raise ValueError(f"speed must be non-negative, got {v.min()}")
    out = REFERENCE_CURVE(v)
    return float(out) if out.ndim == 0 else out
