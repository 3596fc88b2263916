import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussify.errors import BasisError, DisplacementAccuracyError
from gaussify.fock import (
    BasisSpec,
    FockOperator,
    annihilation,
    beam_splitter_5050,
    char_fn,
    char_fn_grid,
    displacement,
    embed,
    fidelity,
    ket,
    logneg_fock,
    number_operator,
    partial_trace,
    partial_transpose,
    permute_modes,
    quadrature_moments,
    quadratures,
    single_mode_displacement,
    state_from_amplitudes,
    state_phi_mu,
    state_psi_lambda,
    tensor,
    trace_norm,
    two_copies,
)
from gaussify.gaussian import two_mode_squeezed_cov


def coherent_amplitudes(alpha, d):
    """<n|alpha> for n < d from the closed form."""
    n = np.arange(d)
    fact = np.array([math.factorial(k) for k in n], dtype=float)
    return np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.sqrt(fact)


def thermal_state(nbar, d, m=1):
    q = nbar / (1 + nbar)
    p = (1 - q) * q ** np.arange(d)
    diag = p
    for _ in range(m - 1):
        diag = np.kron(diag, p)
    return FockOperator(BasisSpec.uniform(m, d), np.diag(diag))


def random_density(rng, basis, rank=3):
    g = rng.normal(size=(basis.dim, rank)) + 1j * rng.normal(size=(basis.dim, rank))
    rho = g @ g.conj().T
    return FockOperator(basis, rho / np.trace(rho))


# --------------------------------------------------------------------------
# basis and operators


def test_basis_index_round_trip():
    b = BasisSpec((3, 4, 2))
    assert b.dim == 24
    for flat in range(b.dim):
        assert b.index(b.occupation(flat)) == flat
    assert b.index((0, 0, 1)) == 1
    assert b.index((1, 0, 0)) == 8


def test_basis_rejects_bad_input():
    with pytest.raises(BasisError):
        BasisSpec(())
    with pytest.raises(BasisError):
        BasisSpec((3, 0))
    with pytest.raises(BasisError):
        BasisSpec((3, 3)).index((3, 0))
    with pytest.raises(BasisError):
        BasisSpec((3,), labels=("a", "b"))


def test_operator_shape_checked():
    with pytest.raises(BasisError):
        FockOperator(BasisSpec((3,)), np.eye(4))


def test_operator_data_is_read_only():
    op = FockOperator(BasisSpec((2,)), np.eye(2))
    with pytest.raises(ValueError):
        op.data[0, 0] = 5


def test_annihilation_matrix_elements():
    b = BasisSpec((5,))
    a = annihilation(b, 0).data
    for n in range(1, 5):
        assert a[n - 1, n] == pytest.approx(np.sqrt(n))
    assert np.allclose(number_operator(b, 0).data, np.diag(np.arange(5)))


def test_commutator_away_from_cutoff():
    b = BasisSpec((8,))
    a = annihilation(b, 0).data
    comm = a @ a.conj().T - a.conj().T @ a
    assert np.allclose(comm[:7, :7], np.eye(7), atol=1e-14)
    # truncation artefact lives only in the top level
    assert comm[7, 7] == pytest.approx(-7)


def test_quadrature_commutator():
    b = BasisSpec((6, 6))
    x, p = quadratures(b, 1)
    comm = (x @ p - p @ x).data
    keep = [b.index((i, j)) for i in range(6) for j in range(5)]
    assert np.allclose(comm[np.ix_(keep, keep)], 1j * np.eye(len(keep)), atol=1e-13)


def test_modes_commute():
    b = BasisSpec((4, 4))
    a0, a1 = annihilation(b, 0).data, annihilation(b, 1).data
    assert np.allclose(a0 @ a1.conj().T, a1.conj().T @ a0)


def test_embed_matches_kron_and_reverses_order():
    rng = np.random.default_rng(1)
    b = BasisSpec((2, 3, 2))
    op = rng.normal(size=(4, 4))
    e = embed(op, b, (2, 0)).data
    # op acts on (mode2, mode0); build the same thing with an explicit permutation
    ref = np.kron(op, np.eye(3)).reshape(2, 2, 3, 2, 2, 3)  # order (m2, m0, m1)
    ref = ref.transpose(1, 2, 0, 4, 5, 3).reshape(12, 12)
    assert np.allclose(e, ref)


def test_embed_rejects_repeated_modes():
    with pytest.raises(BasisError):
        embed(np.eye(4), BasisSpec((2, 2)), (0, 0))


def test_tensor_and_partial_trace():
    rng = np.random.default_rng(2)
    a = random_density(rng, BasisSpec((3,)))
    c = random_density(rng, BasisSpec((2,)))
    ac = tensor(a, c)
    assert ac.basis.dims == (3, 2)
    assert np.allclose(partial_trace(ac, [0]).data, a.data)
    assert np.allclose(partial_trace(ac, [1]).data, c.data)


def test_tensor_dimension_guard():
    big = FockOperator(BasisSpec((150,)), np.eye(150))
    with pytest.raises(BasisError):
        tensor(big, big)


def test_permute_modes_moves_occupations():
    b = BasisSpec((2, 3))
    rho = FockOperator(b, np.outer(ket(b, {(1, 2): 1}), ket(b, {(1, 2): 1}).conj()))
    swapped = permute_modes(rho, [1, 0])
    assert swapped.basis.dims == (3, 2)
    assert swapped.element((2, 1), (2, 1)) == pytest.approx(1)


def test_two_copies_ordering():
    b = BasisSpec((2, 2))
    r1 = state_from_amplitudes([0, 1], b)  # |1,1>
    r2 = FockOperator(b, np.diag([1, 0, 0, 0]))  # |0,0>
    both = two_copies(r1, r2)
    # party-major copy-minor: (A copy1, A copy2, B copy1, B copy2)
    assert both.element((1, 0, 1, 0), (1, 0, 1, 0)) == pytest.approx(1)
    assert both.basis.labels == ((0, 0), (0, 1), (1, 0), (1, 1))


def test_partial_transpose_is_involution_and_preserves_trace():
    rng = np.random.default_rng(3)
    rho = random_density(rng, BasisSpec((3, 2)))
    pt = partial_transpose(rho, [0])
    assert pt.trace() == pytest.approx(1)
    assert np.allclose(partial_transpose(pt, [0]).data, rho.data)
    # transposing both modes is the full transpose
    assert np.allclose(partial_transpose(rho, [0, 1]).data, rho.data.T)


# --------------------------------------------------------------------------
# beam splitter


def test_beam_splitter_single_photon():
    b = BasisSpec((4, 4))
    u = beam_splitter_5050(b, 0, 1).data
    out = u @ ket(b, {(1, 0): 1})
    assert np.allclose(out, ket(b, {(1, 0): 1, (0, 1): -1}))


def test_beam_splitter_hong_ou_mandel():
    b = BasisSpec((4, 4))
    u = beam_splitter_5050(b, 0, 1).data
    out = u @ ket(b, {(1, 1): 1})
    assert np.allclose(out, ket(b, {(2, 0): 1, (0, 2): -1}))


def test_beam_splitter_heisenberg_on_unclipped_sector():
    b = BasisSpec((6, 6))
    u = beam_splitter_5050(b, 0, 1).data
    a, c = annihilation(b, 0).data, annihilation(b, 1).data
    keep = [b.index((i, j)) for i in range(6) for j in range(6) if i + j <= 4]
    lhs = (u.conj().T @ a @ u)[np.ix_(keep, keep)]
    rhs = ((a + c) / np.sqrt(2))[np.ix_(keep, keep)]
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_beam_splitter_rejects_bad_modes():
    with pytest.raises(BasisError):
        beam_splitter_5050(BasisSpec((3, 3)), 0, 0)
    with pytest.raises(BasisError):
        beam_splitter_5050(BasisSpec((3, 4)), 0, 1)


# --------------------------------------------------------------------------
# displacement and characteristic functions


@pytest.mark.parametrize("x,p", [(0.0, 0.0), (1.0, 0.0), (0.3, -1.2), (-2.5, 1.5), (4.0, 4.0)])
def test_displacement_column_is_coherent_state(x, p):
    d = 12
    dm = single_mode_displacement(d, x, p)
    alpha = complex(-p, x) / np.sqrt(2)
    assert np.allclose(dm[:, 0], coherent_amplitudes(alpha, d), atol=1e-13)


def test_displacement_is_exact_not_truncated_unitary():
    # cropping the untruncated operator: columns near the top lose norm
    dm = single_mode_displacement(4, 2.0, 0.0)
    norms = np.linalg.norm(dm, axis=0)
    assert norms[0] < 1 - 1e-3


def test_displacement_composition_on_padded_basis():
    b = BasisSpec((40,))
    d1 = displacement(b, [0.7, 0.0]).data
    d2 = displacement(b, [0.0, 0.4]).data
    d12 = displacement(b, [0.7, 0.4]).data
    # D(r1) D(r2) = exp(-i r1 Sigma r2 / 2) D(r1 + r2) with r1 Sigma r2 = 0.28
    prod = (d1 @ d2)[:10, :10]
    assert np.allclose(prod, np.exp(-0.5j * 0.28) * d12[:10, :10], atol=1e-10)


def test_displacement_rejects_nonfinite():
    with pytest.raises(DisplacementAccuracyError):
        single_mode_displacement(4, np.inf, 0.0)


def test_displacement_length_checked():
    with pytest.raises(BasisError):
        displacement(BasisSpec((3, 3)), [0.1, 0.2])


@pytest.mark.parametrize("nbar", [0.0, 0.25, 1.0])
def test_char_fn_of_thermal_state(nbar):
    rho = thermal_state(nbar, 60)
    for r in ([0.5, 0.0], [1.0, -1.0], [0.0, 2.0]):
        r = np.array(r)
        expected = np.exp(-(2 * nbar + 1) * r @ r / 4)
        assert char_fn(rho, r) == pytest.approx(expected, abs=1e-10)


def test_char_fn_adjoint_identity():
    rng = np.random.default_rng(4)
    b = BasisSpec((4, 3))
    a = FockOperator(b, rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    for _ in range(5):
        r = rng.uniform(-2, 2, size=4)
        assert char_fn(a.dag(), r) == pytest.approx(np.conj(char_fn(a, -r)), abs=1e-12)


def test_char_fn_grid_matches_pointwise():
    rng = np.random.default_rng(5)
    rho = random_density(rng, BasisSpec((3, 4)))
    axis = np.array([-1.0, 0.0, 0.5])
    grid = char_fn_grid(rho, axis)
    assert grid.shape == (3, 3, 3, 3)
    for idx in [(0, 1, 2, 0), (2, 2, 1, 1), (1, 0, 0, 2)]:
        r = axis[list(idx)]
        assert grid[idx] == pytest.approx(char_fn(rho, r), abs=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_char_fn_bounded_by_one_for_states(seed, x, p):
    rho = random_density(np.random.default_rng(seed), BasisSpec((5,)))
    assert abs(char_fn(rho, [x, p])) <= 1 + 1e-12


# --------------------------------------------------------------------------
# moments, entanglement, fidelity


@pytest.mark.parametrize("nbar", [0.0, 0.3, 1.5])
def test_quadrature_moments_thermal(nbar):
    qm = quadrature_moments(thermal_state(nbar, 80))
    assert np.allclose(qm.d, 0, atol=1e-14)
    assert np.allclose(qm.gamma, (2 * nbar + 1) * np.eye(2), atol=1e-10)


def test_quadrature_moments_two_mode_squeezed():
    lam, d = 0.4, 40
    b = BasisSpec((d, d))
    rho = state_from_amplitudes(lam ** np.arange(d), b)
    qm = quadrature_moments(rho)
    assert np.allclose(qm.gamma, two_mode_squeezed_cov(lam), atol=1e-12)


def test_quadrature_moments_coherent_first_moment():
    d = 40
    x, p = 0.6, -0.9
    v = single_mode_displacement(d, x, p)[:, 0]
    rho = FockOperator(BasisSpec((d,)), np.outer(v, v.conj()))
    qm = quadrature_moments(rho)
    # D^dag X D = X - p and D^dag P D = P + x
    assert np.allclose(qm.d, [-p, x], atol=1e-10)
    assert np.allclose(qm.gamma, np.eye(2), atol=1e-10)


def test_quadrature_moments_of_psi_lambda():
    lam = 0.5
    qm = quadrature_moments(state_psi_lambda(lam, BasisSpec((3, 3))))
    n = lam**2 / (1 + lam**2)
    c = lam / (1 + lam**2)
    # <a^dag a> = n on each mode, <a b> = c, no single-mode squeezing
    expected = np.array([
        [1 + 2 * n, 0, 2 * c, 0],
        [0, 1 + 2 * n, 0, -2 * c],
        [2 * c, 0, 1 + 2 * n, 0],
        [0, -2 * c, 0, 1 + 2 * n],
    ])
    assert np.allclose(qm.gamma, expected, atol=1e-14)


def test_quadrature_moments_zero_trace():
    with pytest.raises(ValueError):
        quadrature_moments(FockOperator(BasisSpec((2,)), np.diag([1, -1])))


@pytest.mark.parametrize("lam", [0.1, 0.5, 0.9])
def test_logneg_psi_lambda_closed_form(lam):
    rho = state_psi_lambda(lam, BasisSpec((2, 2)))
    expected = np.log2((1 + lam) ** 2 / (1 + lam**2))
    assert logneg_fock(rho, [0]) == pytest.approx(expected, abs=1e-12)
    assert logneg_fock(rho, [1]) == pytest.approx(expected, abs=1e-12)


def test_logneg_two_mode_squeezed():
    lam, d = 0.5, 30
    rho = state_from_amplitudes(lam ** np.arange(d), BasisSpec((d, d)))
    assert logneg_fock(rho, [0]) == pytest.approx(np.log2(3), abs=1e-8)


def test_logneg_product_state_is_zero():
    rng = np.random.default_rng(6)
    rho = tensor(random_density(rng, BasisSpec((3,))), random_density(rng, BasisSpec((2,))))
    assert logneg_fock(rho, [0]) == pytest.approx(0, abs=1e-12)


def test_logneg_phi_mu_symmetric_cuts():
    rho = state_phi_mu(0.3, BasisSpec((2, 2, 2)))
    vals = [logneg_fock(rho, [j]) for j in range(3)]
    assert np.allclose(vals, vals[0]) and vals[0] > 0


def test_logneg_requires_state():
    with pytest.raises(ValueError):
        logneg_fock(FockOperator(BasisSpec((2, 2)), 2 * np.eye(4)), [0])


def test_trace_norm():
    assert trace_norm(np.diag([1.0, -2.0, 0.5])) == pytest.approx(3.5)


def test_fidelity_cases():
    b = BasisSpec((3,))
    v = ket(b, {(0,): 1, (1,): 1})
    w = ket(b, {(0,): 1})
    rho_v = FockOperator(b, np.outer(v, v.conj()))
    rho_w = FockOperator(b, np.outer(w, w.conj()))
    expected = 1 / np.sqrt(2)
    assert fidelity(v, w) == pytest.approx(expected)
    assert fidelity(v, rho_w) == pytest.approx(expected)
    assert fidelity(rho_v, w) == pytest.approx(expected)
    assert fidelity(rho_v, rho_w) == pytest.approx(expected, abs=1e-7)
    with pytest.raises(BasisError):
        fidelity(v, np.ones(4))


def test_state_constructors():
    b = BasisSpec((3, 3))
    rho = state_psi_lambda(0.5, b)
    assert rho.trace() == pytest.approx(1)
    assert rho.element((1, 1), (1, 1)) == pytest.approx(0.25 / 1.25)
    with pytest.raises(BasisError):
        state_psi_lambda(0.5, BasisSpec((3, 3, 3)))
    with pytest.raises(BasisError):
        state_from_amplitudes([1, 0.1, 6], BasisSpec((2, 2)))
    phi = state_phi_mu(0.3, BasisSpec((2, 2, 2)))
    assert phi.element((1, 0, 1), (1, 0, 1)) == pytest.approx(0.09 / 1.27)
