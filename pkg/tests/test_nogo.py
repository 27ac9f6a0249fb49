import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_sequence, random_system, simpson_first_order
from safegate.errors import ContractError, DegenerateInputError
from safegate.nogo_analysis import (
    closed_form,
    closed_form_residuals,
    nogo_report,
    uncorrectable_dimension,
    uncorrectable_operators,
    verify_closed_form,
)
from safegate.propagation import ControlSystem, PulseSequence, PulseStep, first_order_map, propagate
from safegate.sun_algebra import random_hermitian

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
PAULI = ControlSystem.from_matrices(SX, SZ)


def brute_rank(sys):
    """Rank of the vectorized {i C_n} with no normalization of the powers."""
    a, b = sys.A.matrix, sys.B.matrix
    x = b - a
    vecs = []
    for n in range(1, sys.dim + 1):
        xn = np.linalg.matrix_power(x, n)
        c = 1j * 0.5 * ((a + b) @ xn - xn @ (a + b))
        c = c / max(np.linalg.norm(xn), 1e-300)
        vecs.append(np.concatenate([c.real.ravel(), c.imag.ravel()]))
    sv = np.linalg.svd(np.array(vecs), compute_uv=False)
    return int(np.sum(sv > 1e-9 * sv[0]))


def test_pauli_operators():
    c = uncorrectable_operators(PAULI, max_n=3)
    assert np.allclose(c[0], -2j * SY, atol=1e-14)
    assert np.allclose(c[1], 0, atol=1e-14)


def test_pauli_dimension():
    rep = uncorrectable_dimension(PAULI)
    assert rep.dim_D == 1
    assert np.isclose(abs(np.vdot(rep.hermitized_basis[0], SY)), np.sqrt(2), atol=1e-12)


def test_max_n_precondition():
    with pytest.raises(ContractError):
        uncorrectable_operators(PAULI, max_n=1)


def test_equal_pair_is_degenerate():
    a = random_hermitian(3, np.random.default_rng(0))
    sys = ControlSystem.from_matrices(a, a)
    assert all(np.array_equal(c, np.zeros((3, 3))) for c in uncorrectable_operators(sys))
    with pytest.raises(DegenerateInputError):
        uncorrectable_dimension(sys)


def test_commuting_pair_is_degenerate():
    sys = ControlSystem.from_matrices(np.diag([1.0, 0.0, -1.0]), np.diag([0.5, -2.0, 1.5]))
    with pytest.raises(DegenerateInputError):
        uncorrectable_dimension(sys)


def test_operators_are_anti_hermitian():
    rng = np.random.default_rng(1)
    sys = random_system(4, rng)
    a, b = sys.A.matrix, sys.B.matrix
    for n, c in enumerate(uncorrectable_operators(sys, 6), start=1):
        assert np.max(np.abs(c + c.conj().T)) <= 1e-12
        xn = np.linalg.matrix_power(b - a, n)
        assert np.allclose(c, 0.5 * ((a + b) @ xn - xn @ (a + b)), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_dimension_bound_and_brute_rank(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        sys = ControlSystem.from_matrices(random_hermitian(n, rng), random_hermitian(n, rng))
        rep = uncorrectable_dimension(sys)
        assert 1 <= rep.dim_D <= n - 1
        assert rep.dim_D == brute_rank(sys)


def test_generic_pair_reaches_upper_bound():
    rng = np.random.default_rng(2)
    sys = random_system(5, rng)
    assert uncorrectable_dimension(sys).dim_D == 4


def test_hermitized_basis_orthonormal():
    rng = np.random.default_rng(3)
    sys = random_system(4, rng)
    basis = uncorrectable_dimension(sys).hermitized_basis
    gram = np.einsum("iab,jab->ij", basis.conj(), basis).real
    assert np.allclose(gram, np.eye(len(basis)), atol=1e-12)
    assert np.allclose(basis, basis.conj().transpose(0, 2, 1), atol=1e-14)


def test_cayley_hamilton():
    rng = np.random.default_rng(4)
    sys = random_system(4, rng)
    cs = uncorrectable_operators(sys, 5)
    span = np.array([c.ravel() for c in cs[:4]]).T
    target = cs[4].ravel()
    coef, *_ = np.linalg.lstsq(span, target, rcond=None)
    assert np.linalg.norm(span @ coef - target) <= 1e-8 * np.linalg.norm(target)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(-5, 5), mu=st.floats(-5, 5))
def test_dimension_shift_invariant(seed, lam, mu):
    rng = np.random.default_rng(seed)
    a, b = random_hermitian(4, rng), random_hermitian(4, rng)
    d0 = uncorrectable_dimension(ControlSystem.from_matrices(a, b)).dim_D
    shifted = ControlSystem.from_matrices(a + lam * np.eye(4), b + mu * np.eye(4))
    assert uncorrectable_dimension(shifted).dim_D == d0


# ---------------------------------------------------------------- closed form

@pytest.mark.parametrize("n", [2, 3, 4])
def test_closed_form_random_sequences(n):
    rng = np.random.default_rng(10 + n)
    sys = random_system(n, rng)
    for _ in range(5):
        seq = random_sequence(n, int(rng.integers(1, 20)), rng, scale=3.0)
        assert verify_closed_form(seq, sys) <= 1e-8


def test_closed_form_left_side_against_quadrature():
    rng = np.random.default_rng(5)
    sys = random_system(3, rng)
    seq = random_sequence(3, 10, rng)
    u, _ = propagate(seq, sys)
    for n, c in enumerate(uncorrectable_operators(sys), start=1):
        lhs = simpson_first_order(seq, sys, c, panels=4000)
        assert np.linalg.norm(lhs - closed_form(u, sys, n)) <= 1e-8


def test_opposite_sign_misses_by_twice_the_norm():
    # The "+i" prefactor belongs to the exp(+itH) propagator convention.
    rng = np.random.default_rng(6)
    sys = random_system(3, rng)
    seq = random_sequence(3, 7, rng)
    u, _ = propagate(seq, sys)
    plus = closed_form_residuals(seq, sys, sign=1j)
    expected = [2 * np.linalg.norm(closed_form(u, sys, n)) for n in (1, 2, 3)]
    assert np.allclose(plus, expected, rtol=1e-9)
    assert min(expected) > 1e-3


def test_timing_independence():
    # Split the first B pulse around a zero-length A pulse: same gate, other timings.
    rng = np.random.default_rng(7)
    sys = random_system(3, rng)
    seq1 = random_sequence(3, 6, rng)
    u1, _ = propagate(seq1, sys)
    d = seq1.durations
    seq2 = PulseSequence.alternating(3, np.concatenate([[0.3 * d[0], 0.0, 0.7 * d[0]], d[1:]]))
    u2, _ = propagate(seq2, sys)
    assert np.allclose(u1, u2, atol=1e-12)
    g1 = first_order_map(seq1, sys, uncorrectable_operators(sys)).operators
    g2 = first_order_map(seq2, sys, uncorrectable_operators(sys)).operators
    assert np.max(np.linalg.norm(g1 - g2, axis=(1, 2))) <= 1e-8


def test_identity_gate_has_zero_uncorrectable_response():
    seq = PulseSequence.alternating(2, [np.pi, 0.0, np.pi])  # e^{-2i pi Z} = I
    rep = nogo_report(seq, PAULI)
    assert max(rep.closed_form_norms) <= 1e-12
    assert rep.target_dependence_flag is False
    g = first_order_map(seq, PAULI, uncorrectable_operators(PAULI)).operators
    assert np.max(np.abs(g)) <= 1e-12


def test_nontrivial_gate_sets_flag():
    rng = np.random.default_rng(8)
    sys = random_system(4, rng)
    rep = nogo_report(random_sequence(4, 16, rng), sys)
    assert rep.target_dependence_flag is True
    assert rep.closed_form_residual <= 1e-8
    assert 1 <= rep.dim_D <= 3


def test_waits_rejected():
    seq = PulseSequence.alternating(2, [0.1, 0.2], [0.0, 0.3])
    with pytest.raises(ContractError):
        verify_closed_form(seq, PAULI)


def test_idle_rejected():
    seq = PulseSequence(2, (PulseStep("B", 0.1), PulseStep("idle", 0.2)))
    with pytest.raises(ContractError):
        verify_closed_form(seq, PAULI)


def test_any_a_b_order_satisfies_closed_form():
    # Only A/B factors matter, not strict alternation (odd-K repetitions give B, B).
    rng = np.random.default_rng(9)
    sys = random_system(3, rng)
    labels = ["A", "A", "B", "B", "B", "A"]
    seq = PulseSequence(3, tuple(PulseStep(l, t) for l, t in zip(labels, rng.uniform(0.1, 2, 6))))
    assert verify_closed_form(seq, sys) <= 1e-8
