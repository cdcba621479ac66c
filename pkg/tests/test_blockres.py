"""Block matrix inversion, Schur complements, factorization checks."""

import numpy as np
import pytest

from diraclab.blockres import (
    BlockMatrix2x2,
    NeumannReport,
    neumann_factorization_check,
    neumann_inverse,
    schur_complement,
    schur_inverse,
)

RNG = np.random.default_rng(11)


def _random_block(na, nb, herm_scale=1.0, coupling=0.3):
    # Gram blocks plus a shift: Hermitian positive definite by construction
    a = RNG.standard_normal((na, na)) + 1j * RNG.standard_normal((na, na))
    alpha = a @ a.conj().T + herm_scale * na * np.eye(na)
    d = RNG.standard_normal((nb, nb)) + 1j * RNG.standard_normal((nb, nb))
    delta = d @ d.conj().T + herm_scale * nb * np.eye(nb)
    beta = coupling * (RNG.standard_normal((na, nb)) + 1j * RNG.standard_normal((na, nb)))
    return BlockMatrix2x2(alpha, beta, beta.conj().T, delta)


def test_block_shape_validation():
    with pytest.raises(ValueError):
        BlockMatrix2x2(np.eye(2), np.zeros((3, 2)), np.zeros((2, 2)), np.eye(2))
    with pytest.raises(ValueError):
        BlockMatrix2x2(np.eye(2), np.zeros((2, 2)), np.zeros((2, 3)), np.eye(2))
    with pytest.raises(ValueError):
        BlockMatrix2x2(np.ones(2), np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2))


def test_dense_assembly():
    m = _random_block(2, 3)
    dense = m.dense()
    assert dense.shape == (5, 5)
    assert np.array_equal(dense[:2, :2], m.alpha)
    assert np.array_equal(dense[2:, 2:], m.delta)


def test_schur_inverse_matches_direct():
    for na, nb in [(2, 2), (3, 4), (5, 1)]:
        m = _random_block(na, nb)
        inv = schur_inverse(m)
        dense = m.dense()
        n = na + nb
        assert np.linalg.norm(inv @ dense - np.eye(n)) < 1e-10
        assert np.linalg.norm(dense @ inv - np.eye(n)) < 1e-10


def test_schur_inverse_generic_nonhermitian():
    a = RNG.standard_normal((3, 3)) + 1j * RNG.standard_normal((3, 3)) + 5 * np.eye(3)
    d = RNG.standard_normal((2, 2)) + 1j * RNG.standard_normal((2, 2)) + 5 * np.eye(2)
    b = 0.2 * RNG.standard_normal((3, 2))
    g = 0.2 * RNG.standard_normal((2, 3))
    m = BlockMatrix2x2(a, b, g, d)
    inv = schur_inverse(m)
    assert np.linalg.norm(inv @ m.dense() - np.eye(5)) < 1e-10


def test_schur_complement_value():
    m = _random_block(3, 2)
    s = schur_complement(m)
    expected = m.delta - m.gamma @ np.linalg.inv(m.alpha) @ m.beta
    assert np.allclose(s, expected, atol=1e-12)


def test_condition_cap_refusal():
    m = BlockMatrix2x2(
        np.array([[1.0, 1.0], [1.0, 1.0 + 1e-15]]),
        np.zeros((2, 1)),
        np.zeros((1, 2)),
        np.eye(1),
    )
    with pytest.raises(ValueError, match="condition"):
        schur_inverse(m)


def test_factorization_identity_across_shifts():
    for shift in (0.0, 0.5, 2.0):
        m = _random_block(3, 3)
        rep = neumann_factorization_check(m, imag_shift=shift)
        assert rep.factorization_residual < 1e-10
        assert rep.invertible


def test_factorization_requires_hermitian_delta():
    m = _random_block(2, 2)
    bad = BlockMatrix2x2(m.alpha, m.beta, m.gamma, m.delta + 0.1j * np.eye(2))
    with pytest.raises(ValueError, match="[Hh]ermitian"):
        neumann_factorization_check(bad)


def test_factorization_indefinite_delta_needs_shift():
    m = _random_block(2, 2)
    indef = BlockMatrix2x2(m.alpha, m.beta, m.gamma, np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="definite"):
        neumann_factorization_check(indef, imag_shift=0.0)
    rep = neumann_factorization_check(indef, imag_shift=1.0)
    assert rep.factorization_residual < 1e-10


def test_neumann_report_truthiness():
    ok = NeumannReport(1e-12, 0.5, True)
    bad = NeumannReport(1e-12, 1.5, False)
    assert bool(ok) and not bool(bad)


def test_neumann_inverse_matches_direct():
    m = _random_block(3, 3, herm_scale=6.0, coupling=0.2)
    rep = neumann_factorization_check(m)
    assert rep.contraction_norm < 0.99
    inv = neumann_inverse(m)
    assert np.linalg.norm(inv @ schur_complement(m) - np.eye(3)) < 1e-9


def test_neumann_inverse_with_shift():
    m = _random_block(2, 2, herm_scale=5.0, coupling=0.1)
    k = 0.7
    inv = neumann_inverse(m, imag_shift=k)
    shifted = BlockMatrix2x2(
        m.alpha + 1j * k * np.eye(2), m.beta, m.gamma, m.delta + 1j * k * np.eye(2)
    )
    assert np.linalg.norm(inv @ schur_complement(shifted) - np.eye(2)) < 1e-9


def test_neumann_inverse_refuses_divergent_series():
    strong = BlockMatrix2x2(
        np.eye(2), 40.0 * np.ones((2, 2)), 40.0 * np.ones((2, 2)), np.eye(2)
    )
    with pytest.raises(ValueError, match="contraction"):
        neumann_inverse(strong)
