import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

import ioncrystal as ic
from ioncrystal.cli import main
from ioncrystal.scenario import parse_scenario

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

MINIMAL = """\
trap:
  reference: {charge: 1, mass_amu: 40.0}
  frequencies_khz: [480.0, 630.0, 119.0]
  rf_mhz: 10.66
species:
  ca: {charge: 1, mass_amu: 40.0}
  ca2: {charge: 2, mass_amu: 40.0}
ions: [ca, ca2, ca]
seed: 1
modes:
  axis: x
response:
  axis: x
  field_v_per_m: 1.0e-3
  damping_khz: 1.0
  min_khz: 400.0
  max_khz: 1100.0
  step_khz: 0.2
render:
  noise: true
  flux: 10000.0
  background: 2.0
"""


@pytest.fixture()
def scenario_file(tmp_path):
    def write(text=MINIMAL, name="case.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return path

    return write


def test_parse_minimal_scenario(scenario_file):
    sc = parse_scenario(scenario_file())
    assert sc.name == "case"
    assert [s.charge_number for s in sc.ions] == [1, 2, 1]
    assert sc.calibration.frequencies.to_khz() == pytest.approx((480.0, 630.0, 119.0))
    assert sc.calibration.rf_frequency == pytest.approx(2.0 * math.pi * 10.66e6)
    assert sc.seed == 1
    assert sc.render.noise and sc.render.background == 2.0
    # unspecified sections come back with defaults
    assert sc.equilibrium.restarts == 1
    assert sc.scan.method == "both"


def test_checked_in_scenarios_parse():
    files = sorted(SCENARIOS.glob("*.yaml"))
    assert len(files) >= 5
    for path in files:
        sc = parse_scenario(path)
        assert sc.ions


def test_error_messages_carry_field_paths(scenario_file):
    cases = [
        ("ions: [ca, ca2, ca]", "ions: [ca, cx, ca]", "ions[1]"),
        ("seed: 1", "seed: -3", "seed"),
        ("  axis: x\nresponse", "  axis: x\n  bogus: 2\nresponse", "modes: unknown key"),
        (
            "frequencies_khz: [480.0, 630.0, 119.0]",
            "frequencies_khz: [630.0, 480.0, 119.0]",
            "trap.frequencies_khz",
        ),
    ]
    for old, new, needle in cases:
        path = scenario_file(MINIMAL.replace(old, new))
        with pytest.raises(ic.ScenarioError) as err:
            parse_scenario(path)
        assert needle in str(err.value)


def test_unknown_top_level_key(scenario_file):
    with pytest.raises(ic.ScenarioError) as err:
        parse_scenario(scenario_file(MINIMAL + "\nbogus: 1\n"))
    assert "unknown key 'bogus'" in str(err.value)


def test_boundary_out_of_range(scenario_file):
    text = MINIMAL.replace("  axis: x\nresponse", "  axis: x\n  boundary: 9\nresponse")
    with pytest.raises(ic.ScenarioError) as err:
        parse_scenario(scenario_file(text))
    assert "modes.boundary" in str(err.value)


def test_invalid_yaml_reports_location(scenario_file):
    with pytest.raises(ic.ScenarioError) as err:
        parse_scenario(scenario_file("ions: ["))
    assert "line 1" in str(err.value)


def test_cli_exit_codes(tmp_path, scenario_file):
    good = scenario_file()
    assert main(["modes", "--scenario", str(good), "--out", str(tmp_path / "ok")]) == 0
    # parse failures
    bad = scenario_file(MINIMAL.replace("[480.0, 630.0, 119.0]", "[630.0, 480.0, 119.0]"), "bad.yaml")
    assert main(["modes", "--scenario", str(bad), "--out", str(tmp_path / "a")]) == 2
    assert main(["modes", "--scenario", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "b")]) == 2
    # solver failure: a species too heavy for the rf confinement
    heavy = scenario_file(
        MINIMAL.replace("ca2: {charge: 2, mass_amu: 40.0}", "ca2: {charge: 2, mass_amu: 40.0}\n  pb: {charge: 1, mass_amu: 4000.0}").replace(
            "ions: [ca, ca2, ca]", "ions: [ca, pb]"
        ),
        "heavy.yaml",
    )
    assert main(["equilibrium", "--scenario", str(heavy), "--out", str(tmp_path / "c")]) == 3
    # fit failure: nothing to detect without a drive field
    dark = scenario_file(
        MINIMAL.replace("field_v_per_m: 1.0e-3", "field_v_per_m: 0.0"), "dark.yaml"
    )
    assert main(["response", "--scenario", str(dark), "--out", str(tmp_path / "d")]) == 4


def test_cli_outputs_are_deterministic(tmp_path, scenario_file):
    good = scenario_file()
    for sub in ("one", "two"):
        assert main(["modes", "--scenario", str(good), "--out", str(tmp_path / sub)]) == 0
        assert main(["render", "--scenario", str(good), "--out", str(tmp_path / sub)]) == 0
    for name in ("modes.csv", "eigenvectors.csv", "modes_summary.csv", "crystal.pgm", "crystal.json"):
        a = (tmp_path / "one" / name).read_bytes()
        b = (tmp_path / "two" / name).read_bytes()
        assert a == b, name


def test_cli_seed_override_changes_the_noise(tmp_path, scenario_file):
    good = scenario_file()
    assert main(["render", "--scenario", str(good), "--out", str(tmp_path / "s1"), "--seed", "1"]) == 0
    assert main(["render", "--scenario", str(good), "--out", str(tmp_path / "s2"), "--seed", "2"]) == 0
    assert main(["render", "--scenario", str(good), "--out", str(tmp_path / "s1b"), "--seed", "1"]) == 0
    one = (tmp_path / "s1" / "crystal.pgm").read_bytes()
    assert one != (tmp_path / "s2" / "crystal.pgm").read_bytes()
    assert one == (tmp_path / "s1b" / "crystal.pgm").read_bytes()
    assert json.loads((tmp_path / "s1" / "crystal.json").read_text())["seed"] == 1


def test_cli_record_format(tmp_path, scenario_file):
    good = scenario_file()
    assert main([
        "modes", "--scenario", str(good), "--out", str(tmp_path), "--format", "record",
    ]) == 0
    record = json.loads((tmp_path / "modes.json").read_text())
    assert {"modes", "summary"} <= set(record)
    assert record["summary"]["axis"] == "x"
    assert len(record["modes"]) == 9
    assert all({"freq_khz", "axis", "soft"} <= set(m) for m in record["modes"])


def test_cli_calibrate_reports_species(tmp_path, scenario_file):
    good = scenario_file()
    assert main(["calibrate", "--scenario", str(good), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "species.csv")))
    by_label = {r["label"]: r for r in rows}
    assert float(by_label["ca"]["f_x_khz"]) == pytest.approx(480.0, rel=1e-9)
    assert float(by_label["ca2"]["f_z_khz"]) == pytest.approx(
        119.0 * math.sqrt(2.0), rel=1e-9
    )


def test_cli_render_sidecar_marks_dark_ions(tmp_path, scenario_file):
    good = scenario_file()
    assert main(["render", "--scenario", str(good), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "crystal.pgm").read_bytes().startswith(b"P5\n")
    side = json.loads((tmp_path / "crystal.json").read_text())
    assert {"ions", "origin_um", "um_per_px", "shape", "seed", "noise"} <= set(side)
    bright = [ion["bright"] for ion in side["ions"]]
    assert bright == [True, False, True]
    rows = list(csv.DictReader(open(tmp_path / "projection.csv")))
    assert [r["bright"] for r in rows] == ["true", "false", "true"]


def test_cli_modes_match_benchmark_spectrum(tmp_path):
    scenario = SCENARIOS / "six_ion_impurity.yaml"
    assert main(["modes", "--scenario", str(scenario), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "modes.csv")))
    got = sorted(float(r["freq_khz"]) for r in rows if r["axis"] == "x")
    expected = (352.0, 403.0, 423.0, 463.0, 468.0, 1006.0)
    assert len(got) == 6
    for g, e in zip(got, expected):
        assert abs(g - e) / e < 0.02
    summary = {r["key"]: r["value"] for r in csv.DictReader(open(tmp_path / "modes_summary.csv"))}
    assert 40.0 < float(summary["min_same_side_gap_khz"]) < 50.0


def test_cli_scan_reports_critical_points(tmp_path):
    scenario = SCENARIOS / "three_ion_arrangements.yaml"
    assert main(["scan", "--scenario", str(scenario), "--out", str(tmp_path)]) == 0
    crit = {r["arrangement"]: float(r["alpha_x"]) for r in csv.DictReader(open(tmp_path / "critical.csv"))}
    assert crit["pure"] == pytest.approx(5.0 / 12.0, abs=1e-3)
    assert 0.36 <= crit["outer"] <= 0.38
    phase = list(csv.DictReader(open(tmp_path / "phase_map.csv")))
    assert {r["arrangement"] for r in phase} == set(crit)
