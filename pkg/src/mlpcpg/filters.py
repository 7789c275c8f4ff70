"""Second-order Butterworth low-pass filters, discretised with the bilinear transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def butter2_lowpass(cutoff: float, fs: float) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``(b, a)`` of a 2nd-order low-pass, ``a[0] == 1``.

    The analog prototype is prewarped so the -3 dB point lands exactly on
    ``cutoff`` after the bilinear map.
    """
    if not 0.0 < cutoff < 0.5 * fs:
        raise ValueError(f"cutoff {cutoff} Hz must lie in (0, fs/2) for fs={fs} Hz")
    k = np.tan(np.pi * cutoff / fs)
    k2 = k * k
    norm = 1.0 + np.sqrt(2.0) * k + k2
    b = np.array([k2, 2.0 * k2, k2]) / norm
    a = np.array([1.0, 2.0 * (k2 - 1.0) / norm, (1.0 - np.sqrt(2.0) * k + k2) / norm])
    return b, a


def magnitude_response(b, a, freq: float, fs: float) -> float:
    z = np.exp(-1j * 2.0 * np.pi * freq / fs)
    num = b[0] + b[1] * z + b[2] * z * z
    den = a[0] + a[1] * z + a[2] * z * z
    return float(abs(num / den))


@dataclass(frozen=True)
class LowPassState:
    """Transposed direct-form II memories for a bank of identical channels.

    ``z`` is ``None`` until the first sample arrives; the filter then
    warm-starts at that sample so the output has no start-up transient.
    """

    b: np.ndarray
    a: np.ndarray
    z: np.ndarray | None = None

    @classmethod
    def design(cls, cutoff: float, fs: float) -> "LowPassState":
        b, a = butter2_lowpass(cutoff, fs)
        return cls(b, a)

    def reset(self) -> "LowPassState":
        return LowPassState(self.b, self.a, None)


def lowpass_step(state: LowPassState, x) -> tuple[np.ndarray, LowPassState]:
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite filter input")
    b, a = state.b, state.a
    z = state.z
    if z is None:
        z2 = (b[2] - a[2]) * x
        z = np.stack([(b[1] - a[1]) * x + z2, z2])
    y = b[0] * x + z[0]
    z_new = np.stack([b[1] * x - a[1] * y + z[1], b[2] * x - a[2] * y])
    return y, LowPassState(b, a, z_new)


def lowpass_filter(signal, cutoff: float, fs: float) -> np.ndarray:
    """Filter a whole ``(T, ...)`` array sample by sample."""
    state = LowPassState.design(cutoff, fs)
    out = []
    for x in np.asarray(signal, dtype=float):
        y, state = lowpass_step(state, x)
        out.append(y)
    return np.array(out)
