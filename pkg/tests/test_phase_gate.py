import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrcoh.phase_gate import (
    DEFAULT_CUTOFF,
    FockError,
    FockState,
    GateSpec,
    apply_gate,
    gate_from_physical,
    gate_matrix,
    gate_phase,
    gate_phase_with_hbar,
    truth_table,
)
from kerrcoh.scheme_model import kerr_coefficient_m

angles = st.floats(-10, 10, allow_nan=False)
seeds = st.integers(0, 2**32 - 1)


def test_gate_phase_zero_time():
    assert gate_phase(0.3, 1.0, 2.0, 1.0, 1.0, 0.0) == 0.0


def test_gate_phase_pi():
    # delta xi1^2 xi2^2 / (|O1|^2 |O2|^2) = pi * 4 / 4
    assert gate_phase(math.pi, 1.0, 2.0, 1.0, 2.0j, 1.0) == pytest.approx(math.pi, rel=1e-15)


def test_gate_phase_linear_in_time():
    args = (0.01, 0.5, 0.7, 1.3, 0.9)
    assert gate_phase(*args, 2.0) == pytest.approx(2 * gate_phase(*args, 1.0), rel=1e-15)


def test_gate_phase_requires_drives():
    with pytest.raises(FockError):
        gate_phase(0.1, 1.0, 1.0, 0.0, 1.0, 1.0)


def test_gate_phase_with_hbar_is_scaled():
    args = (0.01, 0.5, 0.7, 1.3, 0.9, 3.0)
    assert gate_phase_with_hbar(*args, hbar=2.0) == pytest.approx(2.0 * gate_phase(*args))
    assert gate_phase_with_hbar(*args) == pytest.approx(1.054571817e-34 * gate_phase(*args), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 1), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.1, 10), st.floats(0.1, 10),
       st.floats(0, 100))
def test_gate_phase_matches_kerr_coefficient(delta, xi1, xi2, o1, o2, t):
    expected = -kerr_coefficient_m(xi1, xi2, o1, o2, delta) * t
    assert gate_phase(delta, xi1, xi2, o1, o2, t) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_gate_from_physical_records_provenance():
    spec = gate_from_physical(0.1, 1.0, 1.0, 1.0, 1.0, 2.0)
    assert spec.eta == pytest.approx(0.2)
    assert spec.provenance["source"] == "physical" and spec.provenance["t"] == 2.0
    with pytest.raises(TypeError):
        spec.provenance["t"] = 3.0


def test_gate_spec_rejects_non_finite():
    with pytest.raises(FockError):
        GateSpec(math.inf)


@pytest.mark.parametrize("eta", [0.0, 0.7, math.pi, -2.5])
def test_truth_table(eta):
    table = truth_table(GateSpec(eta))
    assert table[(0, 0)] == 1 and table[(0, 1)] == 1 and table[(1, 0)] == 1
    assert abs(table[(1, 1)] - cmath.exp(1j * eta)) <= 1e-12


def test_higher_occupation_phase():
    eta = 0.37
    out = apply_gate(FockState.basis(2, 3), GateSpec(eta))
    assert abs(out.amplitude(2, 3) - cmath.exp(6j * eta)) <= 1e-12
    assert np.count_nonzero(out.amplitudes) == 1


def test_basis_cutoff_enforced():
    with pytest.raises(FockError, match="cutoff"):
        FockState.basis(DEFAULT_CUTOFF + 1, 0)
    with pytest.raises(FockError):
        FockState.basis(-1, 0)


def test_unnormalized_state_rejected():
    with pytest.raises(FockError, match="normalized"):
        FockState(np.ones((3, 3)))


def test_gate_matrix_diagonal():
    Q = gate_matrix(0.9, cutoff=4)
    assert Q.shape == (25, 25)
    assert np.count_nonzero(Q - np.diag(np.diag(Q))) == 0
    np.testing.assert_allclose(Q @ Q.conj().T, np.eye(25), atol=1e-14)
    # index n1*(cutoff+1) + n2
    assert Q[2 * 5 + 3, 2 * 5 + 3] == pytest.approx(cmath.exp(6j * 0.9))


@settings(max_examples=100, deadline=None)
@given(seeds, angles)
def test_unitary_and_invertible(seed, eta):
    state = FockState.random(np.random.default_rng(seed))
    out = apply_gate(state, GateSpec(eta))
    assert abs(np.linalg.norm(out.amplitudes) - 1) <= 1e-12
    back = apply_gate(out, GateSpec(-eta))
    assert np.abs(back.amplitudes - state.amplitudes).max() <= 1e-12


@settings(max_examples=100, deadline=None)
@given(seeds, angles, angles)
def test_composition(seed, eta1, eta2):
    state = FockState.random(np.random.default_rng(seed))
    two_step = apply_gate(apply_gate(state, GateSpec(eta2)), GateSpec(eta1))
    one_step = apply_gate(state, GateSpec(eta1 + eta2))
    assert np.abs(two_step.amplitudes - one_step.amplitudes).max() <= 1e-12
