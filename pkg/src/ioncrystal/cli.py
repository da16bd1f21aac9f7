"""Command line interface.

    ioncrystal <command> --scenario file.yaml [--seed N] [--out DIR]
                         [--format {csv,record}]

Commands: calibrate, equilibrium, modes, scan, response, render.
Exit codes: 0 success, 2 scenario or argument problem, 3 solver failure,
4 fit failure. Outputs are deterministic for a given scenario and seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .crystal import classify, crystal_length, find_equilibrium, potential_energy
from .errors import (
    BoundaryError,
    CalibrationError,
    FitError,
    ScenarioError,
    SolverError,
)
from .imaging import (
    ProjectionModel,
    fluorescing,
    project,
    render,
    write_pgm,
)
from .modes import (
    min_same_side_gap,
    mode_descriptor,
    localization_ratio,
    normal_modes,
)
from .response import DriveSpec, response_curve, sweep_and_fit
from .scenario import Scenario, parse_scenario
from .trap import (
    anisotropy,
    characteristic_length,
    frequencies_for_species,
)
from .transitions import critical_anisotropy, scan_configurations

_TWO_PI_KHZ = 2e3 * np.pi


def _khz(omega: float) -> float:
    return float(omega) / _TWO_PI_KHZ


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_record(path: Path, record: dict) -> None:
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _length_scale(sc: Scenario) -> float:
    cal = sc.calibration
    return characteristic_length(cal.reference, cal.frequencies.omega_z)


def _solve(sc: Scenario):
    trap = sc.calibration.trap()
    return trap, find_equilibrium(
        trap, sc.ions, seed=sc.seed, restarts=sc.equilibrium.restarts
    )


def _positions_rows(sc: Scenario, config):
    pos = config.positions * 1e6
    for i, label in enumerate(sc.ion_labels):
        s = sc.species[label]
        yield (i, label, s.charge_number, s.mass_amu, pos[i, 0], pos[i, 1], pos[i, 2])


def _cmd_calibrate(sc: Scenario, out: Path, out_format: str) -> int:
    trap = sc.calibration.trap()
    species_rows = []
    species_records = {}
    for label, s in sc.species.items():
        freqs = frequencies_for_species(trap, s)
        ax, ay = anisotropy(freqs)
        fx, fy, fz = freqs.to_khz()
        species_rows.append((label, s.charge_number, s.mass_amu, fx, fy, fz, ax, ay))
        species_records[label] = {
            "charge": s.charge_number,
            "mass_amu": s.mass_amu,
            "f_x_khz": fx,
            "f_y_khz": fy,
            "f_z_khz": fz,
            "alpha_x": ax,
            "alpha_y": ay,
        }
    trap_items = [
        ("axial_curvature_v_m2", trap.axial_curvature),
        ("rf_gradient_v_m2", trap.rf_gradient),
        ("radial_curvature_v_m2", trap.radial_curvature),
        ("rf_frequency_rad_s", trap.rf_frequency),
    ]
    if out_format == "csv":
        _write_csv(out / "trap.csv", ("parameter", "value"), trap_items)
        _write_csv(
            out / "species.csv",
            ("label", "charge", "mass_amu", "f_x_khz", "f_y_khz", "f_z_khz",
             "alpha_x", "alpha_y"),
            species_rows,
        )
    else:
        _write_record(
            out / "calibrate.json",
            {"trap": dict(trap_items), "species": species_records},
        )
    print(f"calibrate: {len(sc.species)} species -> {out}")
    return 0


def _cmd_equilibrium(sc: Scenario, out: Path, out_format: str) -> int:
    trap = sc.calibration.trap()
    result = find_equilibrium(
        trap,
        sc.ions,
        seed=sc.seed,
        restarts=sc.equilibrium.restarts,
        both_branches=sc.equilibrium.both_branches,
    )
    branches = result if sc.equilibrium.both_branches else (result,)
    primary = branches[0]
    sclass = classify(primary, length_scale=_length_scale(sc))
    summary = [
        ("energy_j", potential_energy(trap, primary)),
        ("kind", sclass.kind),
        ("plane", sclass.plane),
        ("order_parameter_um", sclass.order_parameter * 1e6),
        ("length_um", crystal_length(primary) * 1e6),
        ("seed", sc.seed),
    ]
    if out_format == "csv":
        header = ("ion", "label", "charge", "mass_amu", "x_um", "y_um", "z_um")
        _write_csv(out / "positions.csv", header, _positions_rows(sc, primary))
        if len(branches) > 1:
            _write_csv(
                out / "positions_mirror.csv", header, _positions_rows(sc, branches[1])
            )
        _write_csv(out / "equilibrium_summary.csv", ("key", "value"), summary)
    else:
        record = {
            "ions": [
                dict(zip(("ion", "label", "charge", "mass_amu", "x_um", "y_um",
                          "z_um"), row))
                for row in _positions_rows(sc, primary)
            ],
            "summary": {k: v for k, v in summary},
        }
        if len(branches) > 1:
            record["mirror_ions"] = [
                dict(zip(("ion", "label", "charge", "mass_amu", "x_um", "y_um",
                          "z_um"), row))
                for row in _positions_rows(sc, branches[1])
            ]
        _write_record(out / "equilibrium.json", record)
    print(
        f"equilibrium: {primary.n} ions, {sclass.kind}, "
        f"length {crystal_length(primary) * 1e6:.3f} um -> {out}"
    )
    return 0


def _cmd_modes(sc: Scenario, out: Path, out_format: str) -> int:
    trap, config = _solve(sc)
    modes = normal_modes(trap, config)
    boundary = sc.modes.boundary
    n = config.n
    mode_rows = []
    vec_rows = []
    for m in range(3 * n):
        desc = mode_descriptor(modes, m)
        ratio = None
        if boundary is not None and 0 < boundary < n - 1:
            ratio = localization_ratio(desc, boundary)
        mode_rows.append(
            (m, _khz(desc.frequency), desc.dominant_axis, desc.soft, ratio)
            + tuple(desc.ion_amplitudes)
        )
        for i in range(n):
            for ax, name in enumerate("xyz"):
                vec_rows.append((m, i, name, modes.vectors[3 * i + ax, m]))
    gap = None
    try:
        gap = _khz(
            min_same_side_gap(modes, axis=sc.modes.axis, boundary_index=boundary)
        )
    except BoundaryError:
        pass
    summary = [("axis", sc.modes.axis), ("boundary", boundary),
               ("min_same_side_gap_khz", gap)]
    if out_format == "csv":
        _write_csv(
            out / "modes.csv",
            ("mode", "freq_khz", "axis", "soft", "localization_ratio")
            + tuple(f"amp_{i}" for i in range(n)),
            mode_rows,
        )
        _write_csv(
            out / "eigenvectors.csv", ("mode", "ion", "axis", "component"), vec_rows
        )
        _write_csv(out / "modes_summary.csv", ("key", "value"), summary)
    else:
        _write_record(
            out / "modes.json",
            {
                "modes": [
                    {
                        "mode": row[0],
                        "freq_khz": row[1],
                        "axis": row[2],
                        "soft": bool(row[3]),
                        "localization_ratio": row[4],
                        "ion_amplitudes": list(map(float, row[5:])),
                    }
                    for row in mode_rows
                ],
                "summary": {k: v for k, v in summary},
            },
        )
    print(f"modes: {3 * n} modes, min same-side gap {gap} kHz -> {out}")
    return 0


def _cmd_scan(sc: Scenario, out: Path, out_format: str) -> int:
    family = sc.calibration.family()
    arrangements = sc.scan.arrangements or {"ions": sc.ions}
    alphas = np.linspace(sc.scan.alpha_min, sc.scan.alpha_max, sc.scan.points)
    pm = scan_configurations(family, arrangements, alphas, seed=sc.seed)
    map_rows = [
        (
            p.alpha_x,
            p.alpha_y,
            p.label,
            p.structure.kind if p.structure else None,
            p.structure.plane if p.structure else None,
            p.structure.order_parameter * 1e6 if p.structure else None,
            p.error,
        )
        for p in pm.points
    ]
    critical_rows = []
    if sc.scan.critical:
        for label, ions in arrangements.items():
            cp = critical_anisotropy(
                family,
                ions,
                method=sc.scan.method,
                bracket=(sc.scan.alpha_min, sc.scan.alpha_max),
                seed=sc.seed,
            )
            critical_rows.append(
                (label, cp.alpha_x, cp.alpha_y, cp.method, cp.cross_check)
            )
    if out_format == "csv":
        _write_csv(
            out / "phase_map.csv",
            ("alpha_x", "alpha_y", "arrangement", "kind", "plane",
             "order_parameter_um", "error"),
            map_rows,
        )
        if critical_rows:
            _write_csv(
                out / "critical.csv",
                ("arrangement", "alpha_x", "alpha_y", "method", "cross_check"),
                critical_rows,
            )
    else:
        _write_record(
            out / "scan.json",
            {
                "phase_map": [
                    dict(zip(("alpha_x", "alpha_y", "arrangement", "kind", "plane",
                              "order_parameter_um", "error"), row))
                    for row in map_rows
                ],
                "critical": [
                    dict(zip(("arrangement", "alpha_x", "alpha_y", "method",
                              "cross_check"), row))
                    for row in critical_rows
                ],
            },
        )
    print(
        f"scan: {len(arrangements)} arrangements x {len(alphas)} points -> {out}"
    )
    return 0


def _cmd_response(sc: Scenario, out: Path, out_format: str) -> int:
    trap, config = _solve(sc)
    modes = normal_modes(trap, config)
    r = sc.response
    count = int(round((r.max_khz - r.min_khz) / r.step_khz)) + 1
    grid = (r.min_khz + r.step_khz * np.arange(count)) * _TWO_PI_KHZ
    drive = DriveSpec(
        axis=r.axis,
        field_amplitude=r.field_v_per_m,
        damping_rate=r.damping_khz * _TWO_PI_KHZ,
        frequencies=grid,
    )
    curve = response_curve(modes, drive)
    fits = sweep_and_fit(modes, drive)
    mode_khz = [_khz(w) for w in modes.frequencies]
    peak_rows = [
        (
            _khz(f.center),
            _khz(f.center_stderr),
            f.height * 1e6,
            _khz(f.width),
            f.offset * 1e6,
            f.n_points,
            min(mode_khz, key=lambda mk: abs(mk - _khz(f.center))),
        )
        for f in fits
    ]
    if out_format == "csv":
        _write_csv(
            out / "response.csv",
            ("freq_khz",) + tuple(f"amp_um_{i}" for i in range(config.n)),
            (
                (_khz(w),) + tuple(curve.amplitudes[g] * 1e6)
                for g, w in enumerate(curve.frequencies)
            ),
        )
        _write_csv(
            out / "peaks.csv",
            ("center_khz", "stderr_khz", "height_um", "width_khz", "offset_um",
             "n_points", "nearest_mode_khz"),
            peak_rows,
        )
    else:
        _write_record(
            out / "response.json",
            {
                "peaks": [
                    dict(zip(("center_khz", "stderr_khz", "height_um", "width_khz",
                              "offset_um", "n_points", "nearest_mode_khz"), row))
                    for row in peak_rows
                ],
                "grid_khz": [_khz(w) for w in curve.frequencies],
                "amplitudes_um": (curve.amplitudes * 1e6).tolist(),
            },
        )
    print(f"response: {len(fits)} resonances fitted -> {out}")
    return 0


def _cmd_render(sc: Scenario, out: Path, out_format: str) -> int:
    trap, config = _solve(sc)
    pm = ProjectionModel()
    positions = project(config.positions, pm)
    bright = fluorescing(config)
    amps = None
    dirs = None
    if sc.render.mode is not None:
        modes = normal_modes(trap, config)
        if sc.render.mode >= len(modes.frequencies):
            raise ScenarioError(
                f"render.mode: index {sc.render.mode} out of range for "
                f"{len(modes.frequencies)} modes"
            )
        desc = mode_descriptor(modes, sc.render.mode)
        amps = desc.ion_amplitudes * sc.render.amplitude_um
        dirs = np.tile([1.0, 0.0], (config.n, 1))
        for i in range(config.n):
            vec = pm.matrix @ desc.pattern[i]
            norm = np.linalg.norm(vec)
            if norm > 0.0:
                dirs[i] = vec / norm
    rng = np.random.default_rng(sc.seed) if sc.render.noise else None
    image = render(
        positions,
        pm,
        bright=bright,
        amplitudes_um=amps,
        directions=dirs,
        flux=sc.render.flux,
        background=sc.render.background,
        rng=rng,
        tag=sc.name,
    )
    write_pgm(image, out / "crystal.pgm")
    sidecar = {
        "scenario": sc.name,
        "seed": sc.seed,
        "um_per_px": image.um_per_px,
        "origin_um": [image.origin_um[0], image.origin_um[1]],
        "shape": list(image.intensity.shape),
        "mode": sc.render.mode,
        "amplitude_um": sc.render.amplitude_um,
        "noise": sc.render.noise,
        "ions": [
            {
                "label": label,
                "bright": bool(bright[i]),
                "u_um": float(positions[i, 0]),
                "v_um": float(positions[i, 1]),
            }
            for i, label in enumerate(sc.ion_labels)
        ],
    }
    _write_record(out / "crystal.json", sidecar)
    if out_format == "csv":
        _write_csv(
            out / "projection.csv",
            ("ion", "label", "bright", "u_um", "v_um"),
            (
                (i, label, bright[i], positions[i, 0], positions[i, 1])
                for i, label in enumerate(sc.ion_labels)
            ),
        )
    dark = int((~bright).sum())
    print(
        f"render: {image.intensity.shape[1]}x{image.intensity.shape[0]} px, "
        f"{dark} dark ions -> {out}"
    )
    return 0


_COMMANDS = {
    "calibrate": _cmd_calibrate,
    "equilibrium": _cmd_equilibrium,
    "modes": _cmd_modes,
    "scan": _cmd_scan,
    "response": _cmd_response,
    "render": _cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ioncrystal",
        description="Mixed-charge ion crystal structure, modes, and imaging",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("calibrate", "invert reference frequencies into trap parameters"),
        ("equilibrium", "relax the ions to a stable structure"),
        ("modes", "normal-mode spectrum of the relaxed structure"),
        ("scan", "structure scan over the trap anisotropy"),
        ("response", "driven response sweep with resonance fits"),
        ("render", "synthetic camera image of the relaxed structure"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--format", choices=("csv", "record"), default="csv",
                       dest="out_format", help="csv tables or one JSON record")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        sc = parse_scenario(args.scenario)
        if args.seed is not None:
            if args.seed < 0:
                raise ScenarioError("--seed must be non-negative")
            sc = dataclasses.replace(sc, seed=args.seed)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](sc, out, args.out_format)
    except (ScenarioError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
