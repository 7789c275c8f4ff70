"""Gait evaluation: step frequency, step length, cost of transport, contact patterns.

All functions are pure and operate on a :class:`~mlpcpg.trajlog.TrajectoryLog`
or on plain arrays.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import minimize_scalar

from .freqcurve import ANIMAL_CURVE, REFERENCE_CURVE, FrequencyCurve, f_ref  # noqa: F401
from .kinematics import BODY_MASS

GRAVITY = 9.81
ANALYSIS_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# velocity-frequency curve

def fit_origin_curve(v, f, c_bounds=(1e-4, 10.0)) -> FrequencyCurve:
    """Least-squares fit of ``a + b ln(v + c)`` constrained through the origin.

    The constraint ``a = -b ln c`` turns the model into ``b ln(1 + v/c)``, so
    ``b`` has a closed form for each ``c`` and only ``c`` is searched.
    """
    v = np.asarray(v, dtype=float)
    f = np.asarray(f, dtype=float)
    if v.shape != f.shape or v.ndim != 1:
        raise ValueError("v and f must be 1-D arrays of equal length")
    if v.size < 3:
        raise ValueError("need at least 3 samples")
    if np.any(v <= 0):
        raise ValueError("speeds must be positive")
    if np.ptp(v) == 0:
        raise ValueError("degenerate samples: all speeds are equal")

    def solve(c):
        g = np.log1p(v / c)
        b = float(g @ f / (g @ g))
        return b, float(np.sum((f - b * g) ** 2))

    res = minimize_scalar(lambda c: solve(c)[1], bounds=c_bounds, method="bounded",
                          options={"xatol": 1e-12})
    c = float(res.x)
    b = solve(c)[0]
    return FrequencyCurve(a=-b * np.log(c), b=b, c=c)


# ---------------------------------------------------------------------------
# step frequency

def _hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _sinusoid_energy(seg_w: np.ndarray, w: np.ndarray, t: np.ndarray, freq: float) -> float:
    """Energy of the windowed segment captured by a windowed sinusoid at ``freq``."""
    basis = np.stack([w * np.cos(2.0 * np.pi * freq * t), w * np.sin(2.0 * np.pi * freq * t)], 1)
    coef, *_ = np.linalg.lstsq(basis, seg_w, rcond=None)
    return float(np.sum((basis @ coef) ** 2))


def step_frequency(signal, fs: float = 25.0, window: float = 2.0, hop: float = 0.25,
                   pad: int = 8, refine: bool = True) -> np.ndarray:
    """Dominant frequency (Hz) of each STFT window of ``signal``.

    The signal is mean-removed, cut into Hann windows and zero-padded ``pad``
    times. The peak non-DC bin is located with a parabolic fit on the log
    magnitude. With ``refine`` the estimate is polished by maximising the
    fit of a single windowed sinusoid within half a bin, which removes the
    bias from the negative-frequency image when a window holds only one or
    two cycles. Windows with no oscillation report 0.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be 1-D")
    n_win = int(round(window * fs))
    n_hop = max(1, int(round(hop * fs)))
    if x.size < n_win:
        raise ValueError(f"signal has {x.size} samples, shorter than one {window} s window")
    x = x - x.mean()
    w = _hann(n_win)
    n_fft = n_win * pad
    bin_hz = fs / n_fft
    first = max(1, pad // 2)          # skip DC and its leakage
    t = np.arange(n_win) / fs
    scale = max(np.max(np.abs(x)), 1e-300)
    out = []
    for start in range(0, x.size - n_win + 1, n_hop):
        seg = x[start:start + n_win]
        if np.ptp(seg) <= 1e-12 * max(scale, 1.0):
            out.append(0.0)
            continue
        mag = np.abs(np.fft.rfft(seg * w, n_fft))
        k = first + int(np.argmax(mag[first:-1]))
        lm = np.log(mag[k - 1:k + 2] + 1e-300)
        denom = lm[0] - 2.0 * lm[1] + lm[2]
        delta = 0.5 * (lm[0] - lm[2]) / denom if denom < 0 else 0.0
        est = (k + delta) * bin_hz
        if refine:
            half = 0.5 * fs / n_win
            lo, hi = max(est - half, 0.5 * bin_hz), min(est + half, 0.5 * fs)
            res = minimize_scalar(lambda fr: -_sinusoid_energy(seg * w, w, t, fr),
                                  bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
            est = float(res.x)
        out.append(est)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# events on trajectory logs

def touchdowns(contact) -> np.ndarray:
    """Indices where a contact flag switches from swing to stance."""
    c = np.asarray(contact, dtype=bool)
    return np.flatnonzero(c[1:] & ~c[:-1]) + 1


def step_length(log, feet=None) -> np.ndarray:
    """Horizontal base displacement between consecutive touchdowns of each foot.

    Returns one value per complete cycle, pooled over ``feet`` (all four by
    default); empty when no foot completes a cycle.
    """
    feet = range(log.contacts.shape[1]) if feet is None else feet
    xy = log.position[:, :2]
    out = []
    for foot in feet:
        td = touchdowns(log.contacts[:, foot])
        for a, b in zip(td[:-1], td[1:]):
            out.append(float(np.linalg.norm(xy[b] - xy[a])))
    return np.asarray(out)


def path_length(log) -> float:
    return float(np.sum(np.linalg.norm(np.diff(log.position[:, :2], axis=0), axis=1)))


def mechanical_energy(log) -> float:
    """``sum_t sum_j |tau_j qd_j| dt`` with each sample held over the preceding interval."""
    power = np.sum(np.abs(log.tau * log.qd), axis=1)
    dt = np.diff(log.t)
    return float(np.sum(power[1:] * dt))


def cost_of_transport(log, mass: float = BODY_MASS, gravity: float = GRAVITY,
                      min_distance: float = 0.1) -> float:
    """Mechanical energy per unit weight per unit horizontal distance travelled."""
    d = path_length(log)
    if d <= min_distance:
        raise ValueError(f"distance travelled {d:.4f} m is too short for a cost of transport")
    return mechanical_energy(log) / (mass * gravity * d)


@dataclass(frozen=True)
class ContactDiagram:
    raster: np.ndarray          # (4, T) bool
    duty_factors: np.ndarray    # (4,)


def duty_factor(contact) -> float:
    """Stance fraction averaged over complete touchdown-to-touchdown cycles.

    Without a complete cycle the fraction over the whole record is used.
    """
    c = np.asarray(contact, dtype=bool)
    td = touchdowns(c)
    if td.size < 2:
        return float(c.mean()) if c.size else 0.0
    return float(np.mean([c[a:b].mean() for a, b in zip(td[:-1], td[1:])]))


def contact_diagram(log) -> ContactDiagram:
    raster = np.asarray(log.contacts, dtype=bool).T.copy()
    return ContactDiagram(raster=raster, duty_factors=np.array([duty_factor(r) for r in raster]))


def phase_offset(theta_a, theta_b) -> float:
    """Circular mean of ``theta_b - theta_a``, in ``(-pi, pi]``."""
    d = np.asarray(theta_b, dtype=float) - np.asarray(theta_a, dtype=float)
    return float(np.angle(np.mean(np.exp(1j * d))))


def mean_amplitudes(log, joints_per_leg: int = 3) -> np.ndarray:
    """Time mean of the oscillator amplitude per joint group (roll, pitch, knee)."""
    r = np.asarray(log.cpg_r, dtype=float)
    return r.reshape(r.shape[0], -1, joints_per_leg).mean(axis=(0, 1))


# ---------------------------------------------------------------------------
# aggregate metrics

@dataclass(frozen=True)
class GaitMetrics:
    velocity: float
    frequency: np.ndarray       # per window
    step_lengths: np.ndarray    # per cycle
    cot: float
    duty_factors: np.ndarray
    contact_raster: np.ndarray
    amplitudes: np.ndarray

    @property
    def mean_frequency(self) -> float:
        return float(np.mean(self.frequency)) if self.frequency.size else 0.0

    @property
    def mean_step_length(self) -> float:
        return float(np.mean(self.step_lengths)) if self.step_lengths.size else float("nan")


KNEE_COLUMNS = (2, 5, 8, 11)


def analyze(log, joint: int = 2, fs: float | None = None) -> GaitMetrics:
    """Compute every gait metric for one trajectory log.

    ``joint`` selects the analysed joint angle channel (default: front-left knee).
    """
    duration = float(log.t[-1] - log.t[0]) if log.t.size > 1 else 0.0
    fs = fs if fs is not None else (1.0 / float(np.median(np.diff(log.t))))
    dist = path_length(log)
    try:
        freq = step_frequency(log.q[:, joint], fs=fs)
    except ValueError:
        freq = np.zeros(0)
    try:
        cot = cost_of_transport(log)
    except ValueError:
        cot = float("nan")
    diagram = contact_diagram(log)
    return GaitMetrics(
        velocity=dist / duration if duration > 0 else 0.0,
        frequency=freq,
        step_lengths=step_length(log),
        cot=cot,
        duty_factors=diagram.duty_factors,
        contact_raster=diagram.raster,
        amplitudes=mean_amplitudes(log),
    )


METRICS_COLUMNS = ("schema_version", "run", "v", "f", "f_ref", "step_length", "cot",
                   "duty_fl", "duty_fr", "duty_rl", "duty_rr")


def metrics_row(name: str, m: GaitMetrics) -> dict:
    row = {"schema_version": ANALYSIS_SCHEMA_VERSION, "run": name, "v": m.velocity,
           "f": m.mean_frequency, "f_ref": f_ref(m.velocity), "step_length": m.mean_step_length,
           "cot": m.cot}
    for leg, d in zip(("fl", "fr", "rl", "rr"), m.duty_factors):
        row[f"duty_{leg}"] = d
    return row


def write_rows(path, rows, columns) -> Path:
    """Write dict rows as CSV with a fixed column order; floats use ``repr``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                             for k, v in row.items()})
    return path


def write_figure_data(out_dir, runs: dict) -> list[Path]:
    """Long-format CSVs for plotting, one per figure kind.

    ``runs`` maps a run name to its :class:`GaitMetrics`. Files: cost of
    transport by run, frequency vs velocity, step length vs velocity and
    the contact raster.
    """
    out_dir = Path(out_dir)
    v = ANALYSIS_SCHEMA_VERSION
    cot = [{"schema_version": v, "run": k, "v": m.velocity, "cot": m.cot} for k, m in runs.items()]
    freq = [{"schema_version": v, "run": k, "window": i, "v": m.velocity, "f": f,
             "f_ref": f_ref(m.velocity)}
            for k, m in runs.items() for i, f in enumerate(m.frequency)]
    length = [{"schema_version": v, "run": k, "cycle": i, "v": m.velocity, "step_length": s}
              for k, m in runs.items() for i, s in enumerate(m.step_lengths)]
    raster = [{"schema_version": v, "run": k, "step": t, "foot": foot, "contact": int(c)}
              for k, m in runs.items() for foot, row in zip(("FL", "FR", "RL", "RR"),
                                                            m.contact_raster)
              for t, c in enumerate(row)]
    return [
        write_rows(out_dir / "cost_of_transport.csv", cot, ("schema_version", "run", "v", "cot")),
        write_rows(out_dir / "frequency_velocity.csv", freq,
                   ("schema_version", "run", "window", "v", "f", "f_ref")),
        write_rows(out_dir / "step_length_velocity.csv", length,
                   ("schema_version", "run", "cycle", "v", "step_length")),
        write_rows(out_dir / "contact_raster.csv", raster,
                   ("schema_version", "run", "step", "foot", "contact")),
    ]
