import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import basis_states, phase, pure_states, unit
from singlerail.errors import DomainError, PhotonLimitError
from singlerail.fock import (
    BeamSplitter,
    Circuit,
    Delay,
    Ensemble,
    FockBasisState,
    ModeLabel,
    PhaseShift,
    PureState,
    apply_element,
    apply_purity,
    format_basis,
    format_state,
    make_distinguishable_qubit,
    make_qubit_state,
    parse_basis,
    parse_state,
    run_circuit,
    tensor,
)

M1, M2 = ModeLabel(1), ModeLabel(2)


# ---------------------------------------------------------------- basis / ordering


def test_mode_label_ordering_is_lexicographic():
    labels = [ModeLabel(2, 0, 0), ModeLabel(1, 1, 0), ModeLabel(1, 0, 1), ModeLabel(1, 0, 0)]
    assert sorted(labels) == [ModeLabel(1, 0, 0), ModeLabel(1, 0, 1), ModeLabel(1, 1, 0), ModeLabel(2, 0, 0)]


def test_basis_canonical_form_drops_zeros_and_merges():
    b = FockBasisState({M2: 1, M1: 0, ModeLabel(3): 2})
    assert b.occupations == ((M2, 1), (ModeLabel(3), 2))
    assert b == FockBasisState([(ModeLabel(3), 2), (M2, 1)])
    assert b.total == 3
    assert FockBasisState([(M1, 1), (M1, 1)]).occupation(M1) == 2


def test_negative_occupation_rejected():
    with pytest.raises(DomainError):
        FockBasisState({M1: -1})


@given(basis_states())
def test_basis_serialization_roundtrip(b):
    assert parse_basis(format_basis(b)) == b


@given(pure_states())
def test_state_serialization_roundtrip(s):
    assert parse_state(format_state(s)).isclose(s, 0.0)


def test_state_text_format():
    s = PureState({FockBasisState({ModeLabel(2, 1, 0): 1, M1: 2}): 0.5 - 0.25j})
    assert format_state(s) == "0.5 -0.25 | (1,0,0):2 (2,1,0):1\n"


def test_prune_tol_drops_tiny_amplitudes():
    s = PureState({FockBasisState(): 1.0, FockBasisState({M1: 1}): 1e-16})
    assert len(s) == 1
    s = PureState({FockBasisState(): 1.0, FockBasisState({M1: 1}): 1e-16}, prune_tol=0.0)
    assert len(s) == 2


def test_photon_clamp():
    PureState.fock((M1, 8))
    with pytest.raises(PhotonLimitError):
        PureState.fock((M1, 9))


# ---------------------------------------------------------------- constructors


def test_make_qubit_state_cases():
    assert make_qubit_state(1.0, 0.3, M1).isclose(PureState.vacuum())
    assert make_qubit_state(0.0, 0.0, M1).isclose(PureState.fock(M1))
    s = make_qubit_state(1 / math.sqrt(2), 0.0, M1)
    assert abs(s.norm_sq() - 1) < 1e-15
    assert abs(s.amplitude(()) - s.amplitude({M1: 1})) < 1e-15


@given(unit, phase)
def test_make_qubit_state_amplitudes(alpha, delta):
    s = make_qubit_state(alpha, delta, M1)
    assert s.is_normalized()
    assert abs(s.amplitude(()) - alpha) < 1e-12
    assert abs(s.amplitude({M1: 1}) - math.sqrt(1 - alpha**2) * cmath.exp(1j * delta)) < 1e-12


@pytest.mark.parametrize("alpha", [-0.1, 1.1])
def test_make_qubit_state_domain(alpha):
    with pytest.raises(DomainError):
        make_qubit_state(alpha, 0.0, M1)


def test_distinguishable_qubit_limits():
    a, d = 0.4, 0.9
    assert make_distinguishable_qubit(a, d, 1.0, M1, 3).isclose(make_qubit_state(a, d, M1))
    s = make_distinguishable_qubit(a, d, 0.0, M1, 3)
    assert s.amplitude({M1: 1}) == 0
    assert abs(abs(s.amplitude({ModeLabel(1, 0, 3): 1})) ** 2 - (1 - a * a)) < 1e-12
    with pytest.raises(DomainError):
        make_distinguishable_qubit(a, d, 1.2, M1, 3)
    with pytest.raises(DomainError):
        make_distinguishable_qubit(a, d, 0.5, M1, 0)


def _hom_coincidence(xa, xb):
    s = tensor(make_distinguishable_qubit(0.0, 0.0, xa, M1, 1), make_distinguishable_qubit(0.0, 0.0, xb, M2, 2))
    out = apply_element(s, BeamSplitter(1, 2))
    return sum(abs(a) ** 2 for b, a in out if {m.spatial for m in b.modes()} == {1, 2})


def test_hom_dip_is_exact():
    out = apply_element(PureState.fock(M1, M2), BeamSplitter(1, 2))
    assert abs(out.amplitude({M1: 1, M2: 1})) < 1e-12
    assert abs(out.amplitude({M1: 2}) - 1 / math.sqrt(2)) < 1e-12
    assert abs(out.amplitude({M2: 2}) + 1 / math.sqrt(2)) < 1e-12


@given(st.floats(0, 1), st.floats(0, 1))
def test_hom_visibility_equals_weight_product(xa, xb):
    # visibility 1 - 2 P_cc equals the product of principal-mode weights
    assert abs((1 - 2 * _hom_coincidence(xa, xb)) - xa * xb) < 1e-12


@given(st.floats(0, 1))
def test_hom_equal_weights(x):
    assert abs(_hom_coincidence(x, x) - (1 - x * x) / 2) < 1e-12


def test_apply_purity_components():
    a = 0.6
    q = make_qubit_state(a, 0.2, M1)
    e = apply_purity(q, 1.0, a)
    assert len(e) == 1
    e = apply_purity(make_qubit_state(1.0, 0.0, M1), 0.0, 1.0)
    assert len(e) == 1 and e.components[0][1].isclose(PureState.vacuum())
    e = apply_purity(q, 0.98, a)
    w = [c[0] for c in e.components]
    assert w == pytest.approx([0.98, 0.02 * a * a, 0.02 * (1 - a * a)])
    with pytest.raises(DomainError):
        apply_purity(q, 1.5, a)
    with pytest.raises(DomainError):
        apply_purity(q, 0.5, 0.3)


@given(unit, unit, phase)
def test_apply_purity_density_matrix(lam, alpha, delta):
    q = make_qubit_state(alpha, delta, M1)
    e = apply_purity(q, lam, alpha)
    rho = np.zeros((2, 2), complex)
    for w, s in e.components:
        v = np.array([s.amplitude(()), s.amplitude({M1: 1})])
        rho += w * np.outer(v, v.conj())
    b = math.sqrt(1 - alpha**2)
    c = lam * alpha * b * cmath.exp(-1j * delta)
    assert np.allclose(rho, [[alpha**2, c], [c.conjugate(), b * b]], atol=1e-12)


# ---------------------------------------------------------------- elements


def test_beam_splitter_single_photon():
    out = apply_element(PureState.fock(M1), BeamSplitter(1, 2, 0.5))
    expected = PureState({FockBasisState({M1: 1}): 1 / math.sqrt(2), FockBasisState({M2: 1}): 1 / math.sqrt(2)})
    assert out.isclose(expected)


@pytest.mark.parametrize("T", [0.0, 0.3, 0.5, 1.0])
@pytest.mark.parametrize("s", [1, -1])
def test_beam_splitter_matrix_unitary(T, s):
    U = np.array(BeamSplitter(1, 2, T, s).matrix())
    assert np.allclose(U @ U.T, np.eye(2), atol=1e-15)


def test_beam_splitter_full_transmission_flips_second_port_sign():
    s = tensor(make_qubit_state(0.3, 0.4, M1), make_qubit_state(0.8, 1.1, M2))
    flipped = apply_element(s, PhaseShift(2, math.pi))
    assert apply_element(s, BeamSplitter(1, 2, 1.0)).isclose(flipped, 1e-12)


def test_two_beam_splitters_compose_to_identity():
    U = np.array(BeamSplitter(1, 2, 0.5).matrix())
    assert np.allclose(U @ U, np.eye(2), atol=1e-15)
    s = tensor(PureState.fock((M1, 2)), make_qubit_state(0.5, 0.7, M2))
    c = Circuit([BeamSplitter(1, 2, 0.5), BeamSplitter(1, 2, 0.5)])
    assert run_circuit(s, c).isclose(s, 1e-12)


def test_negative_sign_beam_splitter_is_a_rotation():
    # four 50:50 rotations give -identity; on a two-photon state that is +identity
    U = np.array(BeamSplitter(1, 2, 0.5, -1).matrix())
    assert np.allclose(np.linalg.matrix_power(U, 4), -np.eye(2), atol=1e-15)
    s = PureState.fock(M1, M2)
    out = run_circuit(s, Circuit([BeamSplitter(1, 2, 0.5, -1)] * 4))
    assert out.isclose(s, 1e-12)


def test_beam_splitter_validation():
    with pytest.raises(DomainError):
        BeamSplitter(1, 2, 1.5)
    with pytest.raises(DomainError):
        BeamSplitter(1, 1)
    with pytest.raises(DomainError):
        BeamSplitter(1, 2, 0.5, 2)


def test_beam_splitter_time_bin_restriction():
    s = PureState.fock(ModeLabel(1, 0), ModeLabel(1, 1))
    out = apply_element(s, BeamSplitter(1, 2, 0.0, 1, time_bin=1))
    assert out.isclose(PureState.fock(ModeLabel(1, 0), ModeLabel(2, 1)))


def test_phase_shift_multiplies_by_occupation():
    s = PureState.fock((M1, 2), M2)
    out = apply_element(s, PhaseShift(1, 0.3))
    assert abs(out.amplitude({M1: 2, M2: 1}) - cmath.exp(0.6j)) < 1e-15


def test_delay_shifts_time_bins_only():
    s = PureState.fock(ModeLabel(1, 0, 2), ModeLabel(2, 0))
    out = apply_element(s, Delay(1, 2))
    assert out.isclose(PureState.fock(ModeLabel(1, 2, 2), ModeLabel(2, 0)))
    with pytest.raises(DomainError):
        apply_element(s, Delay(1, -1))


def test_empty_circuit_is_identity():
    s = make_qubit_state(0.3, 0.2, M1)
    assert run_circuit(s, Circuit()) is s


def test_balanced_mzi_cos2():
    for phi in np.linspace(0, 2 * math.pi, 9):
        c = Circuit([BeamSplitter(1, 2), PhaseShift(2, phi), BeamSplitter(1, 2)])
        out = run_circuit(PureState.fock(M1), c)
        assert abs(abs(out.amplitude({M1: 1})) ** 2 - math.cos(phi / 2) ** 2) < 1e-12


elements = st.one_of(
    st.builds(BeamSplitter, st.just(1), st.sampled_from([2, 3]), unit, st.sampled_from([1, -1])),
    st.builds(PhaseShift, st.sampled_from([1, 2, 3]), phase),
    st.builds(Delay, st.sampled_from([1, 2, 3]), st.integers(0, 2)),
)


@settings(max_examples=1000)
@given(pure_states(), elements)
def test_elements_preserve_norm_and_photon_number(s, e):
    out = apply_element(s, e)
    assert abs(out.norm_sq() - 1.0) <= 1e-9
    totals_in = {b.total for b in s.terms}
    assert {b.total for b in out.terms} <= totals_in


def test_ensemble_validation_and_mapping():
    q = make_qubit_state(0.6, 0.0, M1)
    e = apply_purity(q, 0.5, 0.6)
    out = run_circuit(e, Circuit([BeamSplitter(1, 2)]))
    assert [w for w, _ in out.components] == [w for w, _ in e.components]
    with pytest.raises(DomainError):
        Ensemble(((0.5, q), (0.4, q)))
    with pytest.raises(DomainError):
        Ensemble(((1.0, PureState({FockBasisState(): 2.0})),))


def test_tensor_rejects_shared_modes():
    with pytest.raises(DomainError):
        tensor(PureState.fock(M1), PureState.fock(M1))
