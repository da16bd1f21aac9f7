"""Linear-to-zigzag transitions under a radial stiffness scan.

The scan knob is the trap anisotropy alpha = (omega_z / omega_x)^2 of a
singly charged reference species; it is varied by changing the rf field
gradient while the static curvatures stay fixed. This leaves the axial
problem untouched, so the linear chain is the same configuration at
every alpha and only its transverse stability changes.

Two independent detectors locate the critical anisotropy: the sign
change of the lowest transverse curvature at the linear chain (soft
mode), and the onset of a nonzero transverse order parameter in the
relaxed structure. They must agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .crystal import (
    CrystalConfiguration,
    StructureClass,
    _mass_weighted_eigh,
    axial_equilibrium,
    classify,
    find_equilibrium,
    gradient,
    hessian,
)
from .errors import (
    BracketError,
    MethodDisagreementError,
    NonStationaryError,
    SolverError,
)
from .trap import (
    IonSpecies,
    SpeciesFrequencies,
    TrapModel,
    anisotropy,
    calibrate_from_frequencies,
    characteristic_length,
    frequencies_for_species,
)

_ALPHA_MIN = 1e-3
_ALPHA_MAX = 64.0
_STATIONARY_REL = 1e-9  # of the configuration's characteristic force
_SOFT_EIG_REL = 1e-9


def _force_scale(trap: TrapModel, config: CrystalConfiguration) -> float:
    """Largest per-ion sum of trap and Coulomb force magnitudes, newtons."""
    from .constants import K_COULOMB
    from .crystal import _squared_frequencies

    pos = config.positions
    w2 = _squared_frequencies(trap, config.ions)
    trap_force = np.abs(config.masses[:, None] * w2 * pos).sum(axis=1)
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    qq = K_COULOMB * np.outer(config.charges, config.charges)
    coulomb = (qq / dist**2).sum(axis=1)
    return float((trap_force + coulomb).max())


@dataclass(frozen=True)
class AnisotropyFamily:
    """Family of traps sharing static curvatures, parametrised by alpha_x.

    Built from one calibration; trap_at(alpha) rescales the rf gradient
    so the reference species sees omega_x^2 = omega_z^2 / alpha.
    """

    reference: IonSpecies
    axial_curvature: float
    radial_curvature: float
    rf_frequency: float

    @classmethod
    def from_calibration(
        cls,
        reference: IonSpecies,
        frequencies: SpeciesFrequencies,
        rf_frequency: float,
    ) -> "AnisotropyFamily":
        trap = calibrate_from_frequencies(reference, frequencies, rf_frequency)
        return cls(
            reference=reference,
            axial_curvature=trap.axial_curvature,
            radial_curvature=trap.radial_curvature,
            rf_frequency=rf_frequency,
        )

    def trap_at(self, alpha_x: float) -> TrapModel:
        if not alpha_x > 0.0:
            raise ValueError(f"alpha_x must be positive, got {alpha_x}")
        q = self.reference.charge
        m = self.reference.mass
        a = q * self.axial_curvature / m
        b = q * self.radial_curvature / m
        wx2 = 4.0 * a / alpha_x
        c = 0.5 * wx2 + a + b
        gamma = m * self.rf_frequency * math.sqrt(c) / q
        return TrapModel(
            axial_curvature=self.axial_curvature,
            rf_gradient=gamma,
            radial_curvature=self.radial_curvature,
            rf_frequency=self.rf_frequency,
        )

    def frequencies_at(self, alpha_x: float) -> SpeciesFrequencies:
        return frequencies_for_species(self.trap_at(alpha_x), self.reference)

    def alpha_y_at(self, alpha_x: float) -> float:
        return anisotropy(self.frequencies_at(alpha_x))[1]


@dataclass(frozen=True)
class CriticalPoint:
    """Critical anisotropy of one arrangement.

    alpha_x is the detected transition point (to within tolerance);
    cross_check carries the order-parameter estimate when both detectors
    ran.
    """

    alpha_x: float
    alpha_y: float
    method: str
    arrangement: tuple[IonSpecies, ...]
    tolerance: float
    cross_check: float | None = None


@dataclass(frozen=True)
class PhasePoint:
    alpha_x: float
    alpha_y: float
    label: str
    structure: StructureClass | None
    error: str | None = None


@dataclass(frozen=True)
class PhaseMap:
    """Grid of relaxed structures per arrangement over an alpha scan."""

    points: tuple[PhasePoint, ...]

    def labels(self) -> list[str]:
        seen: list[str] = []
        for p in self.points:
            if p.label not in seen:
                seen.append(p.label)
        return seen

    def for_label(self, label: str) -> list[PhasePoint]:
        return sorted(
            (p for p in self.points if p.label == label), key=lambda p: p.alpha_x
        )

    def validate_monotone(self) -> None:
        """A chain that has left the linear phase must not re-enter it."""
        for label in self.labels():
            left_linear = False
            for p in self.for_label(label):
                if p.structure is None:
                    continue
                if p.structure.kind != "linear":
                    left_linear = True
                elif left_linear:
                    raise ValueError(
                        f"non-monotone phase boundary for '{label}' "
                        f"at alpha_x = {p.alpha_x}"
                    )


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    negative_count: int
    min_eigenvalue: float
    max_force: float


def _linear_chain(
    family: AnisotropyFamily, ions: Sequence[IonSpecies]
) -> CrystalConfiguration:
    trap = family.trap_at(1.0)
    z = axial_equilibrium(trap, ions)
    pos = np.zeros((len(z), 3))
    pos[:, 2] = z
    return CrystalConfiguration(tuple(ions), pos)


def _soft_axis_min_eig(
    family: AnisotropyFamily, chain: CrystalConfiguration, alpha: float
) -> float:
    """Lowest x-block eigenvalue of the mass-weighted Hessian at the chain."""
    trap = family.trap_at(alpha)
    H = hessian(trap, chain)
    inv = 1.0 / np.sqrt(np.repeat(chain.masses, 3))
    D = H * inv[:, None] * inv[None, :]
    xs = 3 * np.arange(chain.n)
    Dx = D[np.ix_(xs, xs)]
    return float(np.linalg.eigvalsh(0.5 * (Dx + Dx.T))[0])


def _bisect_predicate(predicate, lo, hi, tol, widen):
    """Find the switch point of a monotone predicate, False at lo, True at hi."""
    if predicate(lo):
        if not widen:
            raise BracketError(f"bracket [{lo}, {hi}] already unstable at {lo}")
        while predicate(lo):
            lo *= 0.5
            if lo < _ALPHA_MIN:
                raise BracketError(f"no stable point above alpha = {_ALPHA_MIN}")
    if not predicate(hi):
        if not widen:
            raise BracketError(f"bracket [{lo}, {hi}] still stable at {hi}")
        while not predicate(hi):
            hi *= 2.0
            if hi > _ALPHA_MAX:
                raise BracketError(f"no transition below alpha = {_ALPHA_MAX}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def critical_anisotropy(
    family: AnisotropyFamily,
    ions: Sequence[IonSpecies],
    *,
    method: str = "both",
    bracket: tuple[float, float] = (0.05, 0.95),
    tolerance: float = 1e-4,
    seed: int = 0,
    widen: bool = True,
    agreement_tol: float = 1e-3,
) -> CriticalPoint:
    """Locate the linear-to-zigzag critical anisotropy of an arrangement.

    method 'soft-mode' bisects the sign of the lowest transverse
    curvature of the linear chain; 'order-parameter' bisects the onset
    of transverse displacement in the relaxed structure; 'both' runs the
    two and requires agreement within agreement_tol.
    """
    if method not in ("soft-mode", "order-parameter", "both"):
        raise ValueError(f"unknown method '{method}'")
    ions = tuple(ions)
    lo, hi = bracket
    if not 0.0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")

    alpha_soft = alpha_order = None
    if method in ("soft-mode", "both"):
        chain = _linear_chain(family, ions)
        alpha_soft = _bisect_predicate(
            lambda a: _soft_axis_min_eig(family, chain, a) <= 0.0,
            lo, hi, tolerance, widen,
        )
    if method in ("order-parameter", "both"):
        ell = characteristic_length(
            family.reference,
            frequencies_for_species(family.trap_at(1.0), family.reference).omega_z,
        )

        def relaxed_nonlinear(a: float) -> bool:
            cfg = find_equilibrium(family.trap_at(a), ions, seed=seed)
            return classify(cfg, length_scale=ell).kind != "linear"

        alpha_order = _bisect_predicate(relaxed_nonlinear, lo, hi, tolerance, widen)

    if method == "both":
        assert alpha_soft is not None and alpha_order is not None
        if abs(alpha_soft - alpha_order) > agreement_tol:
            raise MethodDisagreementError(
                f"soft-mode ({alpha_soft:.6f}) and order-parameter "
                f"({alpha_order:.6f}) detectors disagree"
            )
    alpha = alpha_soft if alpha_soft is not None else alpha_order
    assert alpha is not None
    return CriticalPoint(
        alpha_x=float(alpha),
        alpha_y=family.alpha_y_at(float(alpha)),
        method=method,
        arrangement=ions,
        tolerance=tolerance,
        cross_check=alpha_order if method == "both" else None,
    )


def scan_configurations(
    family: AnisotropyFamily,
    arrangements: Mapping[str, Sequence[IonSpecies]],
    alphas: Sequence[float],
    *,
    seed: int = 0,
) -> PhaseMap:
    """Relax every arrangement at every alpha and classify the results.

    Solver failures are recorded per grid point instead of aborting the
    scan. The resulting map is checked for a monotone phase boundary.
    """
    alphas = sorted(float(a) for a in alphas)
    ell = characteristic_length(
        family.reference,
        frequencies_for_species(family.trap_at(1.0), family.reference).omega_z,
    )
    points: list[PhasePoint] = []
    for label, ions in arrangements.items():
        ions = tuple(ions)
        for a in alphas:
            alpha_y = family.alpha_y_at(a)
            try:
                cfg = find_equilibrium(family.trap_at(a), ions, seed=seed)
                sc = classify(cfg, length_scale=ell)
                points.append(PhasePoint(a, alpha_y, label, sc))
            except SolverError as exc:
                points.append(PhasePoint(a, alpha_y, label, None, str(exc)))
    pm = PhaseMap(tuple(points))
    pm.validate_monotone()
    return pm


def configuration_stability(
    trap: TrapModel,
    config: CrystalConfiguration,
    *,
    force_tol: float | None = None,
) -> StabilityReport:
    """Stability of a stationary configuration by curvature count.

    The input must be stationary; otherwise NonStationaryError is raised
    since curvature counts at a non-stationary point say nothing about
    the structure. By default stationarity means the largest residual
    force is below _STATIONARY_REL times the configuration's own force
    scale (the largest per-ion sum of trap and Coulomb force magnitudes,
    which stays meaningful across trap strengths); pass force_tol for an
    absolute bound in newtons.
    """
    g = gradient(trap, config)
    gmax = float(np.abs(g).max())
    if force_tol is None:
        force_tol = _STATIONARY_REL * _force_scale(trap, config)
    if gmax > force_tol:
        raise NonStationaryError(
            f"largest force component {gmax:.3e} N exceeds {force_tol:.3e} N"
        )
    evals, _ = _mass_weighted_eigh(hessian(trap, config), config.masses)
    floor = _SOFT_EIG_REL * max(float(evals[-1]), 0.0)
    negative = int((evals < -floor).sum())
    return StabilityReport(
        stable=negative == 0,
        negative_count=negative,
        min_eigenvalue=float(evals[0]),
        max_force=gmax,
    )
