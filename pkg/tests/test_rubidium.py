import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from kerrcoh._validity import ValidityWarning
from kerrcoh.lindblad import SteadyStateProblem, build_liouvillian, steady_state
from kerrcoh.rubidium import (
    Cell,
    ConvergenceError,
    EllipticalField,
    RotationConfig,
    build_rb_scheme,
    clebsch,
    excited_label,
    ground_label,
    rot1_formula,
    rotation_angle,
    rotation_slope,
    rotation_vs_field,
    scan_ellipticity,
)
from kerrcoh.scheme_model import FieldMode, build_hamiltonian

EXCITED = ("e-1", "e0", "e+1")


def racah_cg(j1, m1, j2, m2, J, M):
    """<j1 m1; j2 m2 | J M> from the Racah closed form (integer spins)."""
    if m1 + m2 != M or abs(M) > J or not abs(j1 - j2) <= J <= j1 + j2:
        return 0.0
    f = math.factorial
    pre = Fraction((2 * J + 1) * f(J + j1 - j2) * f(J - j1 + j2) * f(j1 + j2 - J), f(j1 + j2 + J + 1))
    pre *= f(J + M) * f(J - M) * f(j1 - m1) * f(j1 + m1) * f(j2 - m2) * f(j2 + m2)
    total = Fraction(0)
    for k in range(0, j1 + j2 + 1):
        args = (k, j1 + j2 - J - k, j1 - m1 - k, j2 + m2 - k, J - j2 + m1 + k, J - j1 - m2 + k)
        if min(args) < 0:
            continue
        total += Fraction((-1) ** k, math.prod(f(a) for a in args))
    return float(total) * math.sqrt(pre)


def excited_population(rho):
    return sum(rho.population(e) for e in EXCITED)


# -- scheme -----------------------------------------------------------------------


@pytest.mark.parametrize("m", range(-2, 3))
@pytest.mark.parametrize("q", (-1, 0, 1))
def test_clebsch_matches_racah(m, q):
    assert clebsch(2, m, q, 1) == pytest.approx(racah_cg(2, m, 1, q, 1, m + q), abs=1e-15)


def test_clebsch_tabulated_values():
    assert clebsch(2, -2, 1, 1) == pytest.approx(math.sqrt(3 / 5))
    assert clebsch(2, -1, 1, 1) == pytest.approx(math.sqrt(3 / 10))
    assert clebsch(2, 0, 1, 1) == pytest.approx(math.sqrt(1 / 10))
    assert clebsch(2, 0, 0, 1) == pytest.approx(-math.sqrt(2 / 5))


def test_coupling_structure():
    scheme = build_rb_scheme().scheme
    assert scheme.dim == 8
    plus = [c for c in scheme.couplings if c.field == "sigma+"]
    minus = [c for c in scheme.couplings if c.field == "sigma-"]
    assert len(plus) == len(minus) == 3
    for c in scheme.couplings:
        m_g, m_e = int(c.lower[1:]), int(c.upper[1:])
        assert m_e - m_g == (1 if c.field == "sigma+" else -1)
        assert c.weight == pytest.approx(racah_cg(2, m_g, 1, m_e - m_g, 1, m_e), abs=1e-15)
    fields_of = {g: {c.field for c in scheme.couplings if c.lower == g} for g in scheme.ground_labels}
    assert fields_of["g-2"] == {"sigma+"} and fields_of["g+2"] == {"sigma-"}
    assert fields_of["g0"] == {"sigma+", "sigma-"}


def test_branching_follows_squared_clebsch():
    branches = build_rb_scheme().scheme.decay_branches()
    for me, targets in branches.items():
        assert sum(targets.values()) == pytest.approx(1.0, abs=1e-15)
    # each F'=1 sublevel decays to its three F=2 partners as 6:3:1 (stretched side first)
    assert branches["e+1"] == pytest.approx({"g+2": 0.6, "g+1": 0.3, "g0": 0.1})
    assert branches["e0"] == pytest.approx({"g-1": 0.3, "g0": 0.4, "g+1": 0.3})


def test_subsystems():
    lam = build_rb_scheme(subsystem="lambda").scheme.couplings
    assert {(c.field, c.lower) for c in lam} == {("sigma+", "g-1"), ("sigma-", "g+1")}
    m = build_rb_scheme(subsystem="m").scheme.couplings
    assert len(m) == 4 and all(c.lower in {"g-2", "g0", "g+2"} for c in m)


def test_labels_and_zeeman():
    assert [ground_label(m) for m in (-2, 0, 1)] == ["g-2", "g0", "g+1"]
    assert excited_label(-1) == "e-1"
    shifts = build_rb_scheme(zeeman_rate=2.0).zeeman_shifts(0.5)
    assert shifts["g-2"] == -2.0 and shifts["g+1"] == 1.0 and shifts["e+1"] == 0.0


def test_elliptical_field():
    f = EllipticalField(0.3, intensity=2.0, rabi_scale=0.1)
    assert f.intensity_plus + f.intensity_minus == pytest.approx(2.0)
    assert (f.intensity_plus - f.intensity_minus) / f.intensity == pytest.approx(0.3)
    assert math.hypot(f.rabi_plus, f.rabi_minus) == pytest.approx(f.peak_rabi)
    with pytest.raises(ValueError):
        EllipticalField(1.0)


# -- steady states ----------------------------------------------------------------


def test_sigma_plus_pumps_to_positive_m():
    # with F'=1 both g+1 and g+2 are dark to sigma+
    zs = build_rb_scheme(gamma0=1e-6)
    rho = SteadyStateProblem(zs.scheme, (FieldMode("sigma+", 0.1), FieldMode("sigma-", 0.0))).solve()
    assert rho.population("g+1") + rho.population("g+2") > 0.999
    assert excited_population(rho) < 1e-5


def test_cpt_dark_states_at_zero_field():
    zs = build_rb_scheme(gamma0=0.0)
    fields = EllipticalField(0.0).modes()
    L = build_liouvillian(zs.scheme, fields)
    s = np.linalg.svd(L.generator, compute_uv=False)
    assert np.sum(s <= 1e-13 * 64 * s[0]) >= 2
    # every state in the Hamiltonian's ground-state null space is stationary and dark
    H = build_hamiltonian(zs.scheme, fields)
    w, v = np.linalg.eigh(H)
    dark = v[:, np.abs(w) < 1e-12]
    dark = dark[:, [np.abs(dark[[zs.scheme.index(e) for e in EXCITED], k]).max() < 1e-12 for k in range(dark.shape[1])]]
    assert dark.shape[1] == 2
    for k in range(2):
        rho = np.outer(dark[:, k], dark[:, k].conj())
        assert np.abs(L.apply(rho)).max() <= 1e-12
        assert sum(rho[zs.scheme.index(e), zs.scheme.index(e)].real for e in EXCITED) <= 1e-10


def test_excited_population_vanishes_with_gamma0():
    pops = []
    for g0 in (1e-3, 1e-4, 1e-5):
        zs = build_rb_scheme(gamma0=g0)
        pops.append(excited_population(steady_state(build_liouvillian(zs.scheme, EllipticalField(0.0).modes()))))
    assert pops[0] / pops[1] == pytest.approx(10, rel=0.2)
    assert pops[1] / pops[2] == pytest.approx(10, rel=0.2)


# -- rotation ---------------------------------------------------------------------


def test_rot1_formula_values():
    assert rot1_formula(0.0) == 1.0
    assert rot1_formula(1.0) == 3.5
    assert rot1_formula(0.5) == pytest.approx(0.5 + 2.25 / 3.0625, rel=1e-15)
    assert rot1_formula(0.5) == pytest.approx(1.2347, abs=1e-4)
    grid = np.linspace(0, 0.999, 500)
    assert np.all(np.diff([rot1_formula(q) for q in grid]) > 0)


def test_rotation_angle_basics():
    assert rotation_angle(1e-6j, 1e-6j, 1.0, 1e-4) == 0.0
    assert rotation_angle(2e-7 + 0j, 1e-7 + 0j, 1.0, 1e-4) == pytest.approx(math.pi * 1e4 * 1e-7)
    with pytest.warns(ValidityWarning, match="weak-absorption"):
        rotation_angle(-1e-3j, -1e-3j, 1.0, 1e-4)
    with pytest.raises(ValueError):
        rotation_angle(complex("nan"), 0j, 1.0, 1.0)


def test_rotation_zero_at_zero_field():
    assert rotation_vs_field(build_rb_scheme(), EllipticalField(0.3), 0.0) == 0.0


def test_rotation_odd_in_field():
    zs, f = build_rb_scheme(), EllipticalField(0.0)
    for B in (1e-6, 1e-5, 1e-4):
        plus, minus = rotation_vs_field(zs, f, B), rotation_vs_field(zs, f, -B)
        assert plus != 0
        assert minus == pytest.approx(-plus, rel=1e-9)


def test_rotation_sign_fixture():
    # positive field, linear light, default cell: positive rotation
    assert rotation_vs_field(build_rb_scheme(), EllipticalField(0.0), 1e-6) > 0


def test_slope_regression_fixture():
    scan = scan_ellipticity(RotationConfig(), [0.0])
    assert scan.points[0].slope == pytest.approx(72.7556316772, rel=1e-8)


def test_slope_even_in_q():
    scan = scan_ellipticity(RotationConfig(), [-0.8, -0.5, 0.5, 0.8])
    s = [p.slope for p in scan.points]
    assert s[0] == pytest.approx(s[3], rel=1e-9)
    assert s[1] == pytest.approx(s[2], rel=1e-9)


def test_isolated_lambda_is_flat_in_q():
    scan = scan_ellipticity(RotationConfig(subsystem="lambda"), [-0.8, -0.5, 0.5, 0.8])
    np.testing.assert_allclose(scan.normalized, 1.0, atol=1e-5)


def test_normalization_exact_at_zero():
    scan = scan_ellipticity(RotationConfig(), [-0.5, 0.0, 0.5])
    assert scan.points[1].normalized_slope == 1.0
    assert scan.diagnostics["points"] == 3 * 4


@pytest.mark.parametrize("q", [0.5, 0.8])
def test_convergence_toward_formula(q):
    def gap(**kw):
        return abs(scan_ellipticity(RotationConfig(**kw), [q]).points[0].normalized_slope - rot1_formula(q))

    base = gap()
    assert gap(gamma0=5e-5) < base
    # halving intensity alone moves away; with gamma0 quartered the saturation parameter grows
    assert gap(rabi=0.1 / math.sqrt(2), gamma0=2.5e-5) < base


def test_doppler_changes_shape_but_stays_even_and_normalized():
    scan = scan_ellipticity(RotationConfig(doppler_width=10.0), [-0.5, 0.0, 0.5])
    n = scan.normalized
    assert n[1] == 1.0
    assert n[0] == pytest.approx(n[2], rel=1e-9)
    assert abs(n[2] - rot1_formula(0.5)) > 0.01 * rot1_formula(0.5)
    assert scan.metadata["doppler"] is True and scan.metadata["velocity_classes"] > 1


@pytest.mark.filterwarnings("ignore::kerrcoh._validity.ValidityWarning")
def test_richardson_failure_reported():
    with pytest.raises(ConvergenceError, match="b_step"):
        rotation_slope(build_rb_scheme(), EllipticalField(0.3), b_step=0.5)


@pytest.mark.parametrize("qs", [[], [0.5, 0.2], [0.0, 0.96]])
def test_scan_validation(qs):
    with pytest.raises(ValueError):
        scan_ellipticity(RotationConfig(), qs)


def test_threaded_scan_is_bit_identical():
    qs = [-0.5, 0.2, 0.5]
    serial = scan_ellipticity(RotationConfig(), qs)
    threaded = scan_ellipticity(RotationConfig(threads=3), qs)
    assert serial.points == threaded.points


def test_cell_scales_rotation_linearly():
    zs, f = build_rb_scheme(), EllipticalField(0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ValidityWarning)
        one = rotation_vs_field(zs, f, 1e-6)
        two = rotation_vs_field(zs, f, 1e-6, cell=Cell(density=2e9))
    assert two == pytest.approx(2 * one, rel=1e-12)
