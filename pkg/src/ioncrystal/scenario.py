"""Scenario files: one YAML document describing a trap, ions, and task knobs.

Minimal example:

    trap:
      reference: {charge: 1, mass_amu: 40.0}
      frequencies_khz: [480.0, 630.0, 119.0]
      rf_mhz: 10.66
    species:
      ca:  {charge: 1, mass_amu: 40.0}
      ca2: {charge: 2, mass_amu: 40.0}
    ions: [ca, ca2, ca]
    seed: 1

Optional sections (equilibrium, modes, scan, response, render) carry the
per-task parameters; missing keys fall back to the dataclass defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import CalibrationError, ScenarioError
from .trap import IonSpecies, SpeciesFrequencies
from .transitions import AnisotropyFamily
from .trap import TrapModel, calibrate_from_frequencies


@dataclass(frozen=True)
class Calibration:
    reference: IonSpecies
    frequencies: SpeciesFrequencies
    rf_frequency: float

    def trap(self) -> TrapModel:
        return calibrate_from_frequencies(
            self.reference, self.frequencies, self.rf_frequency
        )

    def family(self) -> AnisotropyFamily:
        return AnisotropyFamily.from_calibration(
            self.reference, self.frequencies, self.rf_frequency
        )


@dataclass(frozen=True)
class EquilibriumParams:
    restarts: int = 1
    both_branches: bool = False


@dataclass(frozen=True)
class ModesParams:
    axis: str = "x"
    boundary: int | None = None


@dataclass(frozen=True)
class ScanParams:
    arrangements: dict[str, tuple[IonSpecies, ...]] = field(default_factory=dict)
    alpha_min: float = 0.05
    alpha_max: float = 0.95
    points: int = 16
    critical: bool = True
    method: str = "both"


@dataclass(frozen=True)
class ResponseParams:
    axis: str = "x"
    field_v_per_m: float = 1e-3
    damping_khz: float = 1.0
    min_khz: float = 100.0
    max_khz: float = 1200.0
    step_khz: float = 0.2


@dataclass(frozen=True)
class RenderParams:
    mode: int | None = None
    amplitude_um: float = 0.0
    noise: bool = False
    flux: float = 1e4
    background: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    calibration: Calibration
    species: dict[str, IonSpecies]
    ion_labels: tuple[str, ...]
    seed: int
    equilibrium: EquilibriumParams
    modes: ModesParams
    scan: ScanParams
    response: ResponseParams
    render: RenderParams

    @property
    def ions(self) -> tuple[IonSpecies, ...]:
        return tuple(self.species[label] for label in self.ion_labels)


def _require(mapping, key, where):
    if not isinstance(mapping, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    if key not in mapping:
        raise ScenarioError(f"{where}: missing required key '{key}'")
    return mapping[key]


def _number(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    if minimum is not None and not value > minimum:
        raise ScenarioError(f"{where}: must be > {minimum}, got {value}")
    return float(value)


def _integer(value, where, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{where}: must be >= {minimum}, got {value}")
    return value


def _species(node, where) -> IonSpecies:
    charge = _integer(_require(node, "charge", where), f"{where}.charge", minimum=1)
    mass = _number(_require(node, "mass_amu", where), f"{where}.mass_amu", minimum=0.0)
    return IonSpecies(charge, mass)


def _section(doc, key) -> dict:
    node = doc.get(key, {})
    if node is None:
        node = {}
    if not isinstance(node, dict):
        raise ScenarioError(f"{key}: expected a mapping")
    return node


def _known_keys(node, allowed, where):
    for k in node:
        if k not in allowed:
            raise ScenarioError(f"{where}: unknown key '{k}'")


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario file. Raises ScenarioError on any problem."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        at = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"{path.name}: invalid YAML{at}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path.name}: top level must be a mapping")
    _known_keys(
        doc,
        {"trap", "species", "ions", "seed", "equilibrium", "modes", "scan",
         "response", "render"},
        path.name,
    )

    trap_node = _require(doc, "trap", path.name)
    ref = _species(_require(trap_node, "reference", "trap"), "trap.reference")
    freqs_node = _require(trap_node, "frequencies_khz", "trap")
    if not (isinstance(freqs_node, list) and len(freqs_node) == 3):
        raise ScenarioError("trap.frequencies_khz: expected a list of three numbers")
    fx, fy, fz = (
        _number(v, f"trap.frequencies_khz[{i}]", minimum=0.0)
        for i, v in enumerate(freqs_node)
    )
    try:
        freqs = SpeciesFrequencies.from_khz(fx, fy, fz)
    except CalibrationError as exc:
        raise ScenarioError(f"trap.frequencies_khz: {exc}") from exc
    rf = _number(_require(trap_node, "rf_mhz", "trap"), "trap.rf_mhz", minimum=0.0)
    calibration = Calibration(ref, freqs, 2.0 * math.pi * 1e6 * rf)

    species_node = _require(doc, "species", path.name)
    if not isinstance(species_node, dict) or not species_node:
        raise ScenarioError("species: expected a non-empty mapping")
    species = {
        str(label): _species(node, f"species.{label}")
        for label, node in species_node.items()
    }

    ions_node = _require(doc, "ions", path.name)
    if not isinstance(ions_node, list) or not ions_node:
        raise ScenarioError("ions: expected a non-empty list of species labels")
    for i, label in enumerate(ions_node):
        if label not in species:
            raise ScenarioError(f"ions[{i}]: unknown species '{label}'")
    ion_labels = tuple(str(v) for v in ions_node)

    seed = _integer(doc.get("seed", 0), "seed", minimum=0)

    eq_node = _section(doc, "equilibrium")
    _known_keys(eq_node, {"restarts", "both_branches"}, "equilibrium")
    equilibrium = EquilibriumParams(
        restarts=_integer(eq_node.get("restarts", 1), "equilibrium.restarts", 1),
        both_branches=bool(eq_node.get("both_branches", False)),
    )

    modes_node = _section(doc, "modes")
    _known_keys(modes_node, {"axis", "boundary"}, "modes")
    axis = str(modes_node.get("axis", "x"))
    if axis not in ("x", "y", "z"):
        raise ScenarioError(f"modes.axis: expected x, y or z, got '{axis}'")
    boundary = modes_node.get("boundary")
    if boundary is not None:
        boundary = _integer(boundary, "modes.boundary", minimum=0)
        if boundary >= len(ion_labels):
            raise ScenarioError(
                f"modes.boundary: index {boundary} out of range for "
                f"{len(ion_labels)} ions"
            )
    modes = ModesParams(axis=axis, boundary=boundary)

    scan_node = _section(doc, "scan")
    _known_keys(
        scan_node,
        {"arrangements", "alpha_min", "alpha_max", "points", "critical", "method"},
        "scan",
    )
    arrangements: dict[str, tuple[IonSpecies, ...]] = {}
    arr_node = scan_node.get("arrangements", {})
    if arr_node is None:
        arr_node = {}
    if not isinstance(arr_node, dict):
        raise ScenarioError("scan.arrangements: expected a mapping")
    for label, labels in arr_node.items():
        if not isinstance(labels, list) or not labels:
            raise ScenarioError(
                f"scan.arrangements.{label}: expected a non-empty list"
            )
        for i, s in enumerate(labels):
            if s not in species:
                raise ScenarioError(
                    f"scan.arrangements.{label}[{i}]: unknown species '{s}'"
                )
        arrangements[str(label)] = tuple(species[s] for s in labels)
    method = str(scan_node.get("method", "both"))
    if method not in ("soft-mode", "order-parameter", "both"):
        raise ScenarioError(f"scan.method: unknown method '{method}'")
    alpha_min = _number(scan_node.get("alpha_min", 0.05), "scan.alpha_min", 0.0)
    alpha_max = _number(scan_node.get("alpha_max", 0.95), "scan.alpha_max", 0.0)
    if alpha_max <= alpha_min:
        raise ScenarioError("scan.alpha_max: must exceed scan.alpha_min")
    scan = ScanParams(
        arrangements=arrangements,
        alpha_min=alpha_min,
        alpha_max=alpha_max,
        points=_integer(scan_node.get("points", 16), "scan.points", minimum=2),
        critical=bool(scan_node.get("critical", True)),
        method=method,
    )

    resp_node = _section(doc, "response")
    _known_keys(
        resp_node,
        {"axis", "field_v_per_m", "damping_khz", "min_khz", "max_khz", "step_khz"},
        "response",
    )
    raxis = str(resp_node.get("axis", "x"))
    if raxis not in ("x", "y", "z"):
        raise ScenarioError(f"response.axis: expected x, y or z, got '{raxis}'")
    rmin = _number(resp_node.get("min_khz", 100.0), "response.min_khz", 0.0)
    rmax = _number(resp_node.get("max_khz", 1200.0), "response.max_khz", 0.0)
    if rmax <= rmin:
        raise ScenarioError("response.max_khz: must exceed response.min_khz")
    field_amp = resp_node.get("field_v_per_m", 1e-3)
    if isinstance(field_amp, bool) or not isinstance(field_amp, (int, float)):
        raise ScenarioError("response.field_v_per_m: expected a number")
    if field_amp < 0.0:
        raise ScenarioError("response.field_v_per_m: must be non-negative")
    response = ResponseParams(
        axis=raxis,
        field_v_per_m=float(field_amp),
        damping_khz=_number(resp_node.get("damping_khz", 1.0), "response.damping_khz", 0.0),
        min_khz=rmin,
        max_khz=rmax,
        step_khz=_number(resp_node.get("step_khz", 0.2), "response.step_khz", 0.0),
    )

    render_node = _section(doc, "render")
    _known_keys(
        render_node, {"mode", "amplitude_um", "noise", "flux", "background"}, "render"
    )
    mode = render_node.get("mode")
    if mode is not None:
        mode = _integer(mode, "render.mode", minimum=0)
    amplitude = render_node.get("amplitude_um", 0.0)
    if isinstance(amplitude, bool) or not isinstance(amplitude, (int, float)):
        raise ScenarioError("render.amplitude_um: expected a number")
    if amplitude < 0.0:
        raise ScenarioError("render.amplitude_um: must be non-negative")
    background = render_node.get("background", 0.0)
    if isinstance(background, bool) or not isinstance(background, (int, float)):
        raise ScenarioError("render.background: expected a number")
    if background < 0.0:
        raise ScenarioError("render.background: must be non-negative")
    render = RenderParams(
        mode=mode,
        amplitude_um=float(amplitude),
        noise=bool(render_node.get("noise", False)),
        flux=_number(render_node.get("flux", 1e4), "render.flux", 0.0),
        background=float(background),
    )

    return Scenario(
        name=path.stem,
        calibration=calibration,
        species=species,
        ion_labels=ion_labels,
        seed=seed,
        equilibrium=equilibrium,
        modes=modes,
        scan=scan,
        response=response,
        render=render,
    )
