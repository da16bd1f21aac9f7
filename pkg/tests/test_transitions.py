import math

import numpy as np
import pytest

import ioncrystal as ic

OMEGA_RF = 2.0 * math.pi * 10.66e6


def test_family_hits_requested_anisotropy(family):
    reference_wz = family.frequencies_at(0.5).omega_z
    for alpha in (0.1, 5.0 / 12.0, 0.9, 1.3):
        freqs = family.frequencies_at(alpha)
        assert (freqs.omega_z / freqs.omega_x) ** 2 == pytest.approx(alpha, rel=1e-12)
        assert freqs.omega_z == pytest.approx(reference_wz, rel=1e-12)
        assert family.alpha_y_at(alpha) == pytest.approx(
            (freqs.omega_z / freqs.omega_y) ** 2, rel=1e-12
        )


def test_family_matches_direct_calibration(family, ca):
    # at the reference anisotropy the family reproduces the calibration inputs
    alpha0 = (119.0 / 480.0) ** 2
    freqs = family.frequencies_at(alpha0)
    for got, want_khz in zip(freqs.to_khz(), (480.0, 630.0, 119.0)):
        assert got == pytest.approx(want_khz, rel=1e-12)
    direct = ic.frequencies_for_species(family.trap_at(alpha0), ca)
    for got, want in zip(direct.as_tuple(), freqs.as_tuple()):
        assert got == pytest.approx(want, rel=1e-12)


def test_pure_three_ion_critical_point(family, ca):
    cp = ic.critical_anisotropy(family, [ca, ca, ca], method="both")
    assert cp.alpha_x == pytest.approx(5.0 / 12.0, abs=1e-3)
    assert cp.cross_check == pytest.approx(5.0 / 12.0, abs=1e-3)
    assert cp.method == "both"


def test_outer_impurity_softens_the_chain(family, ca, ca2):
    cp = ic.critical_anisotropy(family, [ca, ca, ca2], method="both")
    assert 0.36 <= cp.alpha_x <= 0.38


def test_central_impurity_stiffens_the_chain(family, ca, ca2, linear_chain):
    # the soft mode of the central arrangement is the rocking mode whose
    # squared frequency is exactly wx^2 - wz^2, so it crosses zero at
    # alpha = 1 like the two-ion pair
    cp = ic.critical_anisotropy(family, [ca, ca2, ca], method="both")
    assert cp.alpha_x == pytest.approx(1.0, abs=2e-4)
    trap = family.trap_at(1.0)
    modes = ic.normal_modes(trap, linear_chain(trap, [ca, ca2, ca]))
    assert int(modes.soft.sum()) == 1
    assert modes.frequencies[0] == 0.0


def test_two_ion_critical_point(family, ca):
    cp = ic.critical_anisotropy(family, [ca, ca], method="both")
    assert cp.alpha_x == pytest.approx(1.0, abs=2e-4)


def test_critical_ordering(family, ca, ca2):
    outer = ic.critical_anisotropy(family, [ca, ca, ca2], method="soft-mode")
    pure = ic.critical_anisotropy(family, [ca, ca, ca], method="soft-mode")
    central = ic.critical_anisotropy(family, [ca, ca2, ca], method="soft-mode")
    assert outer.alpha_x < pure.alpha_x < central.alpha_x


def test_critical_point_is_scale_invariant(ca):
    weak = ic.AnisotropyFamily.from_calibration(
        ca, ic.SpeciesFrequencies.from_khz(240.0, 315.0, 59.5), OMEGA_RF
    )
    cp = ic.critical_anisotropy(weak, [ca, ca, ca], method="soft-mode")
    assert cp.alpha_x == pytest.approx(5.0 / 12.0, abs=1e-3)


def test_bracket_error_without_widening(family, ca):
    with pytest.raises(ic.BracketError):
        ic.critical_anisotropy(
            family, [ca, ca, ca], bracket=(0.05, 0.2), widen=False
        )


def test_methods_agree(family, ca, ca2):
    soft = ic.critical_anisotropy(family, [ca, ca, ca2], method="soft-mode")
    order = ic.critical_anisotropy(family, [ca, ca, ca2], method="order-parameter")
    assert abs(soft.alpha_x - order.alpha_x) < 1e-3


def test_unknown_method_rejected(family, ca):
    with pytest.raises(ValueError):
        ic.critical_anisotropy(family, [ca, ca], method="guess")


def test_three_regimes(family, ca, ca2):
    arrangements = {
        "pure": [ca, ca, ca],
        "outer": [ca, ca, ca2],
        "central": [ca, ca2, ca],
    }
    pm = ic.scan_configurations(family, arrangements, [0.30, 0.39, 0.45])
    kinds = {
        (p.label, p.alpha_x): p.structure.kind for p in pm.points if p.structure
    }
    assert kinds[("pure", 0.30)] == "linear"
    assert kinds[("outer", 0.30)] == "linear"
    assert kinds[("central", 0.30)] == "linear"
    assert kinds[("pure", 0.39)] == "linear"
    assert kinds[("outer", 0.39)] == "zigzag"
    assert kinds[("central", 0.39)] == "linear"
    assert kinds[("pure", 0.45)] == "zigzag"
    assert kinds[("outer", 0.45)] == "zigzag"
    assert kinds[("central", 0.45)] == "linear"
    assert set(pm.labels()) == set(arrangements)


def test_monotone_phase_boundary_guard():
    zig = ic.StructureClass("zigzag", "xz", 1e-6)
    lin = ic.StructureClass("linear", None, 0.0)
    bad = ic.PhaseMap(
        (
            ic.PhasePoint(0.3, 0.2, "chain", zig),
            ic.PhasePoint(0.4, 0.25, "chain", lin),
        )
    )
    with pytest.raises(ValueError):
        bad.validate_monotone()


def test_scan_records_solver_failures(family, ca):
    heavy = ic.IonSpecies(1, 4000.0)
    pm = ic.scan_configurations(
        family, {"ok": [ca, ca], "heavy": [heavy, heavy]}, [0.3, 0.4]
    )
    for p in pm.for_label("heavy"):
        assert p.structure is None
        assert p.error
    for p in pm.for_label("ok"):
        assert p.structure is not None
        assert p.error is None


def test_configuration_stability(family, ca, ca2, linear_chain):
    below = family.trap_at(0.30)
    above = family.trap_at(0.45)
    stable = ic.configuration_stability(below, linear_chain(below, [ca, ca, ca]))
    assert stable.stable and stable.negative_count == 0
    assert stable.min_eigenvalue > 0.0
    saddle = ic.configuration_stability(above, linear_chain(above, [ca, ca, ca]))
    assert not saddle.stable
    assert saddle.negative_count == 1
    assert saddle.min_eigenvalue < 0.0
    # the central arrangement is still linear-stable at the same stiffness
    central = ic.configuration_stability(above, linear_chain(above, [ca, ca2, ca]))
    assert central.stable


def test_stability_requires_a_stationary_point(trap, ca):
    pos = np.zeros((2, 3))
    pos[:, 2] = (-5e-6, 7e-6)
    with pytest.raises(ic.NonStationaryError):
        ic.configuration_stability(trap, ic.CrystalConfiguration((ca, ca), pos))
