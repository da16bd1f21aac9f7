"""Synthetic camera images of a crystal seen along a diagonal line of sight.

The camera looks along the bisector of the x and z axes (45 degrees by
default), so distances in the x-z plane appear stretched by
1/cos(angle) = sqrt(2) while the out-of-plane y axis is compressed by
cos(angle). A small in-plane rotation models imperfect camera mounting.
Image coordinates (u, v) are in micrometres in object space; the chip
pixel pitch divided by the magnification sets the pixel size.

Fluorescing ions render as Gaussian spots of the optical resolution
width. A driven ion's spot is smeared along its oscillation direction:
the time average over a harmonic oscillation is approximated by adding
the oscillation amplitude in quadrature to the point-spread width.
Doubly charged ions do not fluoresce and leave a gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .crystal import CrystalConfiguration
from .errors import PeakFitError, SpotCountError

_M_TO_UM = 1e6


@dataclass(frozen=True)
class ProjectionModel:
    """Imaging geometry and optics parameters."""

    viewing_angle_deg: float = 45.0
    rotation_deg: float = 3.0
    magnification: float = 17.0
    psf_um: float = 0.9
    pixel_pitch_um: float = 4.25

    def __post_init__(self):
        if not 0.0 <= self.viewing_angle_deg < 90.0:
            raise ValueError("viewing_angle_deg must be in [0, 90)")
        for name in ("magnification", "psf_um", "pixel_pitch_um"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")

    @property
    def um_per_px(self) -> float:
        """Pixel size in object space."""
        return self.pixel_pitch_um / self.magnification

    @property
    def matrix(self) -> np.ndarray:
        """Linear map (2, 3) from lab metres to image micrometres."""
        theta = math.radians(self.viewing_angle_deg)
        stretch = 1.0 / math.cos(theta)
        squeeze = math.cos(theta)
        raw = np.array([[0.0, 0.0, stretch], [stretch, squeeze, 0.0]])
        phi = math.radians(self.rotation_deg)
        rot = np.array(
            [[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]]
        )
        return rot @ raw * _M_TO_UM


@dataclass(frozen=True, eq=False)
class CameraImage:
    """Pixel intensities (photon counts) with object-space geometry.

    intensity[iv, iu] maps to u = origin_um[0] + iu * um_per_px,
    v = origin_um[1] + iv * um_per_px.
    """

    intensity: np.ndarray
    um_per_px: float
    origin_um: tuple[float, float]
    tag: str = ""

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Pixel center coordinates (u along columns, v along rows), um."""
        h, w = self.intensity.shape
        u = self.origin_um[0] + np.arange(w) * self.um_per_px
        v = self.origin_um[1] + np.arange(h) * self.um_per_px
        return u, v


def project(positions: np.ndarray, model: ProjectionModel) -> np.ndarray:
    """Map lab positions (N, 3) in metres to image coordinates (N, 2) in um."""
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    return pos @ model.matrix.T


def project_direction(direction: np.ndarray, model: ProjectionModel) -> np.ndarray:
    """Unit image-plane vector along which a lab-frame direction appears."""
    d = np.asarray(direction, dtype=float)
    v = model.matrix @ d
    norm = np.linalg.norm(v)
    # the kernel of the projection only hits zero up to rounding
    floor = 1e-9 * np.abs(model.matrix).max() * np.linalg.norm(d)
    if norm <= floor:
        raise ValueError("direction projects to zero; it is along the line of sight")
    return v / norm


def fluorescing(config: CrystalConfiguration) -> np.ndarray:
    """Mask of ions that show up on camera (singly charged ones)."""
    return np.array([s.charge_number == 1 for s in config.ions])


def render(
    positions_um: np.ndarray,
    model: ProjectionModel,
    *,
    bright: np.ndarray | None = None,
    amplitudes_um: np.ndarray | None = None,
    directions: np.ndarray | None = None,
    flux: float = 1e4,
    background: float = 0.0,
    rng: np.random.Generator | None = None,
    pad_um: float | None = None,
    tag: str = "",
) -> CameraImage:
    """Render spots at image coordinates (N, 2) into a pixel grid.

    bright masks which ions fluoresce. amplitudes_um smears each spot
    along its unit `directions` row by the oscillation amplitude, added
    in quadrature to the point-spread width. flux is the expected photon
    count per bright ion. With an rng, pixel values are Poisson draws
    over signal plus background; otherwise the noiseless expectation
    (plus background) is returned.
    """
    pos = np.atleast_2d(np.asarray(positions_um, dtype=float))
    n = len(pos)
    bright = np.ones(n, dtype=bool) if bright is None else np.asarray(bright, bool)
    amps = (
        np.zeros(n) if amplitudes_um is None else np.asarray(amplitudes_um, float)
    )
    if directions is None:
        directions = np.tile([1.0, 0.0], (n, 1))
    directions = np.asarray(directions, dtype=float)

    psf = model.psf_um
    sig_par = np.sqrt(psf**2 + amps**2)
    p = model.um_per_px
    if pad_um is None:
        pad_um = 4.0 * float(sig_par.max()) + 2.0
    lo = pos.min(axis=0) - pad_um
    hi = pos.max(axis=0) + pad_um
    width = int(math.ceil((hi[0] - lo[0]) / p)) + 1
    height = int(math.ceil((hi[1] - lo[1]) / p)) + 1
    u = lo[0] + np.arange(width) * p
    v = lo[1] + np.arange(height) * p
    uu, vv = np.meshgrid(u, v)

    img = np.zeros((height, width))
    for i in range(n):
        if not bright[i]:
            continue
        e = directions[i] / np.linalg.norm(directions[i])
        du = uu - pos[i, 0]
        dv = vv - pos[i, 1]
        t_par = du * e[0] + dv * e[1]
        t_perp = -du * e[1] + dv * e[0]
        img += (
            flux
            * p**2
            / (2.0 * math.pi * sig_par[i] * psf)
            * np.exp(-0.5 * ((t_par / sig_par[i]) ** 2 + (t_perp / psf) ** 2))
        )
    if rng is not None:
        img = rng.poisson(img + background).astype(float)
    elif background:
        img = img + background
    return CameraImage(img, p, (float(lo[0]), float(lo[1])), tag)


def _spot_model(xy, a, cu, cv, su, sv, o):
    u, v = xy
    return a * np.exp(
        -((u - cu) ** 2) / (2.0 * su**2) - ((v - cv) ** 2) / (2.0 * sv**2)
    ) + o


def fit_positions(
    image: CameraImage,
    expected_count: int,
    *,
    threshold_frac: float = 0.25,
    min_separation_px: int = 4,
) -> tuple[np.ndarray, np.ndarray]:
    """Locate bright spots and fit each with an elliptical Gaussian.

    Detects local maxima above threshold_frac of the global maximum,
    keeps the brightest expected_count of them (at least
    min_separation_px apart), and fits a window around each. Returns
    positions (expected_count, 2) in um sorted along u, and per-spot rms
    residuals relative to the fitted peak height.

    Raises SpotCountError when the image is empty or has too few maxima.
    """
    if expected_count < 1:
        raise ValueError("expected_count must be >= 1")
    img = image.intensity
    peak = float(img.max())
    if not peak > 0.0:
        raise SpotCountError("image contains no signal")
    padded = np.full((img.shape[0] + 2, img.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = img
    core = padded[1:-1, 1:-1]
    is_max = np.ones_like(img, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == dc == 0:
                continue
            is_max &= core >= padded[1 + dr : padded.shape[0] - 1 + dr,
                                     1 + dc : padded.shape[1] - 1 + dc]
    rows, cols = np.nonzero(is_max & (img > threshold_frac * peak))
    order = np.argsort(img[rows, cols])[::-1]
    kept: list[tuple[int, int]] = []
    for k in order:
        r, c = int(rows[k]), int(cols[k])
        if all(
            (r - r0) ** 2 + (c - c0) ** 2 >= min_separation_px**2 for r0, c0 in kept
        ):
            kept.append((r, c))
    if len(kept) < expected_count:
        raise SpotCountError(
            f"found {len(kept)} spots, expected {expected_count}"
        )
    kept = kept[:expected_count]

    p = image.um_per_px
    u_ax, v_ax = image.coords()
    results = []
    residuals = []
    for r, c in kept:
        half = max(4, int(round(1.5 / p)))
        dr2 = dc2 = 1.0
        for _ in range(2):
            r0, r1 = max(0, r - half), min(img.shape[0], r + half + 1)
            c0, c1 = max(0, c - half), min(img.shape[1], c + half + 1)
            window = img[r0:r1, c0:c1]
            w = np.clip(window - window.min(), 0.0, None)
            total = w.sum()
            if total <= 0.0:
                break
            dr2 = ((np.arange(r0, r1) - r)[:, None] ** 2 * w).sum() / total
            dc2 = ((np.arange(c0, c1) - c)[None, :] ** 2 * w).sum() / total
            needed = int(math.ceil(3.5 * math.sqrt(max(dr2, dc2, 1.0))))
            if needed <= half:
                break
            half = min(needed, 80)
        uu, vv = np.meshgrid(u_ax[c0:c1], v_ax[r0:r1])
        data = img[r0:r1, c0:c1]
        p0 = [
            float(img[r, c] - data.min()),
            float(u_ax[c]),
            float(v_ax[r]),
            max(math.sqrt(dc2) * p, p),
            max(math.sqrt(dr2) * p, p),
            float(data.min()),
        ]
        try:
            popt, _ = curve_fit(
                _spot_model,
                (uu.ravel(), vv.ravel()),
                data.ravel(),
                p0=p0,
                maxfev=20000,
            )
        except RuntimeError as exc:
            raise PeakFitError(f"spot fit failed near pixel ({r}, {c}): {exc}") from exc
        model_img = _spot_model((uu.ravel(), vv.ravel()), *popt)
        rms = float(np.sqrt(np.mean((model_img - data.ravel()) ** 2)))
        results.append((float(popt[1]), float(popt[2])))
        residuals.append(rms / abs(popt[0]) if popt[0] else np.inf)

    by_u = np.argsort([r[0] for r in results])
    return np.array(results)[by_u], np.array(residuals)[by_u]


def write_pgm(image: CameraImage, path, *, maxval: int = 65535) -> None:
    """Write the image as a binary portable graymap, scaled to maxval."""
    if not 0 < maxval < 65536:
        raise ValueError("maxval must be in [1, 65535]")
    data = image.intensity
    top = float(data.max())
    scaled = data * (maxval / top) if top > 0.0 else data
    ints = np.clip(np.rint(scaled), 0, maxval)
    ints = ints.astype(">u2" if maxval > 255 else "u1")
    header = f"P5\n{data.shape[1]} {data.shape[0]}\n{maxval}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(ints.tobytes())


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary portable graymap back into a float array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"not a binary graymap: magic {fields[0]!r}")
    width, height, maxval = (int(f) for f in fields[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    data = np.frombuffer(blob[pos + 1 :], dtype=dtype, count=width * height)
    return data.reshape(height, width).astype(float), maxval
