"""Driven steady-state response and resonance frequency extraction.

A spatially uniform oscillating field E cos(omega_d t) along one axis
couples to mode m with weight b_m = sum_i (q_i / sqrt(M_i)) e_{m,(i,axis)}.
Mass-weighting makes the coupling charge-to-mass sensitive: a uniform
field is not a uniform force, so modes invisible in a single-species
chain light up in a mixed one, and symmetric mixed modes (equal and
opposite weights) stay dark.

The damped mode coordinate responds with amplitude
b_m E / sqrt((omega_m^2 - omega_d^2)^2 + (Gamma omega_d)^2); per-ion
amplitudes sum the mode contributions incoherently, which is the
envelope a camera integrates over many drive phases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .errors import NoPeakError, PeakFitError
from .modes import NormalModeSet

_AXES = "xyz"


@dataclass(frozen=True, eq=False)
class DriveSpec:
    """Uniform-field drive: axis, amplitude (V/m), damping rate and grid (rad/s)."""

    axis: str
    field_amplitude: float
    damping_rate: float
    frequencies: np.ndarray

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"axis must be one of {_AXES!r}, got {self.axis!r}")
        if self.field_amplitude < 0.0:
            raise ValueError("field_amplitude must be non-negative")
        if not self.damping_rate > 0.0:
            raise ValueError("damping_rate must be positive")
        freqs = np.asarray(self.frequencies, dtype=float)
        if freqs.ndim != 1 or len(freqs) < 1:
            raise ValueError("frequencies must be a non-empty 1-d array")
        if np.any(freqs <= 0.0) or np.any(np.diff(freqs) <= 0.0):
            raise ValueError("frequencies must be positive and strictly increasing")
        object.__setattr__(self, "frequencies", freqs)


@dataclass(frozen=True, eq=False)
class ResponseCurve:
    """Per-ion steady-state amplitude (metres) over the drive grid.

    amplitudes has shape (len(frequencies), N).
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray
    drive: DriveSpec


@dataclass(frozen=True)
class PeakFit:
    """One fitted resonance: center and 1-sigma center uncertainty in rad/s."""

    center: float
    center_stderr: float
    height: float
    width: float
    offset: float
    n_points: int
    model: str


def drive_overlap(modes: NormalModeSet, axis: str) -> np.ndarray:
    """Coupling weight b_m of a uniform field along `axis` to every mode."""
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES!r}, got {axis!r}")
    ax = _AXES.index(axis)
    cfg = modes.configuration
    weights = cfg.charges / np.sqrt(cfg.masses)
    components = modes.vectors.reshape(cfg.n, 3, -1)[:, ax, :]
    return weights @ components


def _mode_amplitudes(
    modes: NormalModeSet, drive: DriveSpec, omega_d: np.ndarray
) -> np.ndarray:
    """|mode coordinate| for each drive frequency, shape (G, 3N)."""
    b = np.abs(drive_overlap(modes, drive.axis))
    w2 = modes.frequencies**2
    wd2 = omega_d[:, None] ** 2
    denom = np.sqrt(
        (w2[None, :] - wd2) ** 2 + (drive.damping_rate * omega_d[:, None]) ** 2
    )
    return b[None, :] * drive.field_amplitude / denom


def steady_state(modes: NormalModeSet, drive: DriveSpec, omega_d: float) -> np.ndarray:
    """Per-ion oscillation amplitude (metres) at one drive frequency."""
    return _per_ion(modes, _mode_amplitudes(modes, drive, np.array([omega_d])))[0]


def _per_ion(modes: NormalModeSet, mode_amps: np.ndarray) -> np.ndarray:
    cfg = modes.configuration
    phys = np.abs(modes.vectors.reshape(cfg.n, 3, -1)) / np.sqrt(cfg.masses)[
        :, None, None
    ]
    per_axis = np.einsum("gm,iam->gia", mode_amps, phys)
    return np.linalg.norm(per_axis, axis=2)


def response_curve(modes: NormalModeSet, drive: DriveSpec) -> ResponseCurve:
    """Sweep the drive grid and collect per-ion amplitudes."""
    amps = _per_ion(modes, _mode_amplitudes(modes, drive, drive.frequencies))
    return ResponseCurve(drive.frequencies.copy(), amps, drive)


def _gaussian(x, a, c, s, o):
    return a * np.exp(-((x - c) ** 2) / (2.0 * s**2)) + o


def _lorentzian(x, a, c, g, o):
    return a * g**2 / ((x - c) ** 2 + g**2) + o

_MODELS = {"gaussian": _gaussian, "lorentzian": _lorentzian}


def _peak_window(s: np.ndarray, k: int, floor_frac: float) -> slice:
    lo = k
    while lo > 0 and s[lo - 1] < s[lo]:
        lo -= 1
        if s[lo] <= floor_frac * s[k]:
            break
    hi = k
    last = len(s) - 1
    while hi < last and s[hi + 1] < s[hi]:
        hi += 1
        if s[hi] <= floor_frac * s[k]:
            break
    return slice(lo, hi + 1)


def sweep_and_fit(
    modes: NormalModeSet,
    drive: DriveSpec,
    *,
    model: str = "gaussian",
    detection_factor: float = 5.0,
    floor_frac: float = 0.15,
) -> list[PeakFit]:
    """Detect and fit every resonance in a drive sweep.

    A resonance is a local maximum of the strongest-ion amplitude
    exceeding detection_factor times the median level; each is fit over
    its own flanks (down to floor_frac of the peak, or the valley to the
    next peak) with the chosen line model. Centers come back in rad/s
    with covariance-based uncertainties.
    """
    if model not in _MODELS:
        raise ValueError(f"unknown model '{model}'")
    curve = response_curve(modes, drive)
    s = curve.amplitudes.max(axis=1)
    x = curve.frequencies
    level = detection_factor * float(np.median(s))
    peaks = [
        k
        for k in range(1, len(s) - 1)
        if s[k] > s[k - 1] and s[k] >= s[k + 1] and s[k] > level and s[k] > 0.0
    ]
    if not peaks:
        raise NoPeakError("no resonance above the detection level")

    fits = []
    dx = float(np.diff(x).min())
    for k in peaks:
        win = _peak_window(s, k, floor_frac)
        xs, ys = x[win], s[win]
        if len(xs) < 5:
            raise PeakFitError(
                f"only {len(xs)} samples around the peak near "
                f"{x[k] / (2e3 * np.pi):.1f} kHz; refine the grid"
            )
        base = float(ys.min())
        p0 = [s[k] - base, x[k], max(0.5 * drive.damping_rate, dx), base]
        try:
            popt, pcov = curve_fit(_MODELS[model], xs, ys, p0=p0, maxfev=20000)
        except RuntimeError as exc:
            raise PeakFitError(
                f"fit failed near {x[k] / (2e3 * np.pi):.1f} kHz: {exc}"
            ) from exc
        stderr = float(np.sqrt(pcov[1, 1])) if np.isfinite(pcov[1, 1]) else np.inf
        fits.append(
            PeakFit(
                center=float(popt[1]),
                center_stderr=stderr,
                height=float(popt[0]),
                width=float(abs(popt[2])),
                offset=float(popt[3]),
                n_points=len(xs),
                model=model,
            )
        )
    fits.sort(key=lambda f: f.center)
    return fits
