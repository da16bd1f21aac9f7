import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ioncrystal as ic

KHZ = 2e3 * math.pi


def _grid(lo_khz, hi_khz, step_khz):
    n = int(round((hi_khz - lo_khz) / step_khz)) + 1
    return np.linspace(lo_khz * KHZ, hi_khz * KHZ, n)


@pytest.fixture(scope="module")
def single(trap, ca):
    return ic.normal_modes(trap, ic.CrystalConfiguration((ca,), np.zeros((1, 3))))


@pytest.fixture(scope="module")
def central(trap, ca, ca2, linear_chain):
    return ic.normal_modes(trap, linear_chain(trap, [ca, ca2, ca]))


@pytest.fixture(scope="module")
def outer(trap, ca, ca2, linear_chain):
    return ic.normal_modes(trap, linear_chain(trap, [ca, ca, ca2]))


def test_pure_chain_couples_only_through_com(trap, ca, linear_chain):
    modes = ic.normal_modes(trap, linear_chain(trap, [ca, ca, ca]))
    for axis, f_khz in (("x", 480.0), ("y", 630.0), ("z", 119.0)):
        b = np.abs(ic.drive_overlap(modes, axis))
        bright = np.flatnonzero(b > 1e-12 * b.max())
        assert len(bright) == 1
        assert modes.frequencies[bright[0]] / KHZ == pytest.approx(f_khz, rel=1e-9)


def test_central_rocking_mode_is_dark(central):
    # outer ions move oppositely, the centre ion not at all: the uniform
    # charge-weighted force cannot excite it, on either radial axis
    for axis in ("x", "y"):
        b = np.abs(ic.drive_overlap(central, axis))
        radial = ic.modes_by_axis(central, axis)
        rel = {m: b[m] / b.max() for m in radial}
        dark = [m for m, r in rel.items() if r <= 1e-12]
        assert len(dark) == 1
        assert all(r > 1e-3 for m, r in rel.items() if m != dark[0])
        desc = ic.mode_descriptor(central, dark[0])
        col = "xyz".index(axis)
        assert desc.ion_amplitudes[1] < 1e-9
        assert desc.pattern[0, col] * desc.pattern[2, col] < 0.0


def test_outer_arrangement_lights_every_mode(outer):
    b = np.abs(ic.drive_overlap(outer, "x"))
    for m in ic.modes_by_axis(outer, "x"):
        assert b[m] > 1e-3 * b.max()


def test_single_ion_resonant_amplitude(single, ca):
    E, gamma = 1e-7, 1.0 * KHZ
    wx = 2.0 * math.pi * 480e3
    drive = ic.DriveSpec("x", E, gamma, _grid(465, 495, 0.2))
    amp = ic.steady_state(single, drive, wx)
    assert amp[0] == pytest.approx(ca.charge * E / (ca.mass * gamma * wx), rel=1e-12)
    # far above resonance the ion follows the field like a free charge
    far = ic.steady_state(single, drive, 20.0 * wx)
    assert far[0] == pytest.approx(
        ca.charge * E / (ca.mass * (20.0 * wx) ** 2), rel=5e-3
    )


def test_response_is_linear_in_the_field(central):
    gamma = 1.0 * KHZ
    weak = ic.response_curve(central, ic.DriveSpec("x", 1e-8, gamma, _grid(400, 500, 0.5)))
    strong = ic.response_curve(central, ic.DriveSpec("x", 2e-8, gamma, _grid(400, 500, 0.5)))
    assert np.array_equal(strong.amplitudes, 2.0 * weak.amplitudes)


def test_curve_matches_pointwise_evaluation(central):
    drive = ic.DriveSpec("x", 1e-7, 1.0 * KHZ, _grid(450, 470, 1.0))
    curve = ic.response_curve(central, drive)
    for k in (0, 7, 20):
        assert np.array_equal(
            curve.amplitudes[k], ic.steady_state(central, drive, drive.frequencies[k])
        )


def test_peak_is_nearly_symmetric(single):
    gamma = 1.0 * KHZ
    drive = ic.DriveSpec("x", 1e-7, gamma, _grid(465, 495, 0.2))
    wx = 2.0 * math.pi * 480e3
    up = ic.steady_state(single, drive, wx + 0.5 * gamma)[0]
    down = ic.steady_state(single, drive, wx - 0.5 * gamma)[0]
    assert abs(up - down) / up < 0.01


def test_single_ion_fit_recovers_the_frequency(single):
    fits = ic.sweep_and_fit(single, ic.DriveSpec("x", 1e-7, 1.0 * KHZ, _grid(465, 495, 0.2)))
    assert len(fits) == 1
    fit = fits[0]
    assert abs(fit.center - 2.0 * math.pi * 480e3) < 2.0 * math.pi * 10.0
    assert fit.center_stderr > 0.0
    assert fit.n_points >= 5
    assert fit.model == "gaussian"


def test_fit_error_shrinks_with_the_linewidth(single):
    gamma = 0.2 * KHZ
    fits = ic.sweep_and_fit(single, ic.DriveSpec("x", 1e-7, gamma, _grid(465, 495, 0.05)))
    assert abs(fits[0].center - 2.0 * math.pi * 480e3) < gamma / 10.0


def test_mixed_crystal_sweeps(central, outer):
    drive = ic.DriveSpec("x", 1e-7, 1.0 * KHZ, _grid(400, 1100, 0.2))
    for modes, expected in ((central, 2), (outer, 3)):
        fits = ic.sweep_and_fit(modes, drive)
        assert len(fits) == expected
        assert all(a.center < b.center for a, b in zip(fits, fits[1:]))
        b = np.abs(ic.drive_overlap(modes, "x"))
        bright = [
            m
            for m in ic.modes_by_axis(modes, "x")
            if b[m] > 1e-3 * b.max()
        ]
        assert len(bright) == expected
        for fit in fits:
            err = min(abs(fit.center - modes.frequencies[m]) for m in bright)
            assert err < 2.0 * math.pi * 5.0


def test_lorentzian_model_also_fits(single):
    fits = ic.sweep_and_fit(
        single,
        ic.DriveSpec("x", 1e-7, 1.0 * KHZ, _grid(465, 495, 0.2)),
        model="lorentzian",
    )
    assert fits[0].model == "lorentzian"
    assert abs(fits[0].center - 2.0 * math.pi * 480e3) < 2.0 * math.pi * 50.0


def test_undriven_sweep_has_no_peak(single):
    with pytest.raises(ic.NoPeakError):
        ic.sweep_and_fit(single, ic.DriveSpec("x", 0.0, 1.0 * KHZ, _grid(465, 495, 0.2)))


def test_coarse_grid_is_rejected(single):
    with pytest.raises(ic.PeakFitError):
        ic.sweep_and_fit(single, ic.DriveSpec("x", 1e-7, 1.0 * KHZ, _grid(400, 600, 5.0)))


def test_drive_validation():
    good = _grid(400, 500, 1.0)
    with pytest.raises(ValueError):
        ic.DriveSpec("q", 1e-7, 1.0 * KHZ, good)
    with pytest.raises(ValueError):
        ic.DriveSpec("x", -1e-7, 1.0 * KHZ, good)
    with pytest.raises(ValueError):
        ic.DriveSpec("x", 1e-7, 0.0, good)
    with pytest.raises(ValueError):
        ic.DriveSpec("x", 1e-7, 1.0 * KHZ, good[::-1])
    with pytest.raises(ValueError):
        ic.DriveSpec("x", 1e-7, 1.0 * KHZ, np.array([]))


@settings(deadline=None, max_examples=50)
@given(st.floats(50.0, 1500.0))
def test_steady_state_is_finite_and_positive(central, f_khz):
    drive = ic.DriveSpec("x", 1e-7, 1.0 * KHZ, _grid(400, 500, 1.0))
    amp = ic.steady_state(central, drive, f_khz * KHZ)
    assert np.all(np.isfinite(amp))
    assert np.all(amp >= 0.0)
