"""Operator assembly: flat tori, mapping tori, limits, derivatives."""

import numpy as np
import pytest

from diraclab.assembly import (
    EmptyInvariantSpaceError,
    assemble_dirac,
    bochner_rhs,
    clifford_curvature_term,
    curvature_endomorphism,
    eigenvalue_derivative,
    fiber_invariant_split,
    frame_bundle_operator,
    invariant_projector,
    limit_operator,
    superconnection_pieces,
    write_matrix_text,
    zeroth_order_term,
)
from diraclab.clifford import exterior_module, spinor_gammas
from diraclab.models import AffineMappingTorus, FlatTorusModel
from diraclab.spectral import eigensolve, epsilon_close, subset_epsilon_close


def _circle(length=2 * np.pi, shift=0.5):
    return FlatTorusModel(np.array([[length]]), np.array([shift]))


def _simple_mapping(fiber_shift=0.0, base_shift=0.5, lift="identity"):
    fiber = FlatTorusModel(np.array([[2 * np.pi]]), np.array([fiber_shift]))
    u = np.eye(2, dtype=complex) if lift == "identity" else None
    return AffineMappingTorus(
        fiber=fiber,
        holonomy=np.array([[1]]),
        base_length=2 * np.pi,
        holonomy_lift=u,
        base_shift=base_shift,
    )


def test_circle_spectrum_halves():
    op = assemble_dirac(_circle(), spinor_gammas(1), 4)
    expected = np.array([k + 0.5 for k in range(-4, 4)])
    assert np.allclose(np.sort(eigensolve(op).values), np.sort(expected), atol=1e-12)
    assert op.dim == 8
    modes = sorted({lab[0] for lab in op.basis_labels})
    assert modes == [(k,) for k in range(-4, 4)]


def test_circle_periodic_window_is_symmetric():
    op = assemble_dirac(_circle(shift=0.0), spinor_gammas(1), 3)
    modes = sorted({lab[0][0] for lab in op.basis_labels})
    assert modes == list(range(-3, 4))


def test_labels_unique_and_complete():
    t2 = FlatTorusModel(np.diag([1.0, 1.3]), np.array([0.5, 0.0]))
    op = assemble_dirac(t2, spinor_gammas(2), 2)
    assert len(set(op.basis_labels)) == op.dim
    assert sum(sl.stop - sl.start for sl in op.block_slices) == op.dim


def test_flat_spectrum_matches_fourier_oracle():
    basis = np.array([[1.0, 0.3], [0.0, 1.2]])
    t2 = FlatTorusModel(basis, np.array([0.0, 0.5]))
    cm = spinor_gammas(2)
    op = assemble_dirac(t2, cm, 3)
    oracle = []
    for lab in {l[0] for l in op.basis_labels}:
        p = t2.dual_momentum(np.array(lab))
        oracle.extend([np.linalg.norm(p), -np.linalg.norm(p)])
    assert np.allclose(eigensolve(op).values, np.sort(oracle), atol=1e-9)


@pytest.mark.parametrize(
    "model,module",
    [
        (_circle(), spinor_gammas(1)),
        (FlatTorusModel(np.diag([1.0, 1.4]), np.array([0.5, 0.0])), spinor_gammas(2)),
        (FlatTorusModel(np.array([[1.0, 0.2], [0.0, 0.9]]), np.zeros(2)), exterior_module(2)),
    ],
)
def test_bochner_identity_flat(model, module):
    d = assemble_dirac(model, module, 3)
    sq = np.sort(eigensolve(d).values ** 2)
    rhs = eigensolve(bochner_rhs(model, module, 3)).values
    scale = max(1.0, float(np.max(np.abs(rhs))))
    assert np.max(np.abs(sq - rhs)) < 1e-10 * scale


def test_bochner_identity_mapping():
    mt = _simple_mapping()
    cm = spinor_gammas(2)
    d = assemble_dirac(mt.with_scale(0.5), cm, 4)
    sq = np.sort(eigensolve(d).values ** 2)
    rhs = eigensolve(bochner_rhs(mt.with_scale(0.5), cm, 4)).values
    scale = max(1.0, float(np.max(np.abs(rhs))))
    assert np.max(np.abs(sq - rhs)) < 1e-10 * scale


def test_truncation_validation():
    with pytest.raises(ValueError):
        assemble_dirac(_circle(), spinor_gammas(1), 0)
    with pytest.raises(ValueError):  # wrong module dimension
        assemble_dirac(_circle(), spinor_gammas(2), 2)
    with pytest.raises(TypeError):
        assemble_dirac("nope", spinor_gammas(1), 2)


def test_mapping_connection_shifts_base_frequency():
    mt_a = AffineMappingTorus(
        fiber=FlatTorusModel(np.array([[2 * np.pi]]), np.array([0.5])),
        holonomy=np.array([[1]]),
        base_length=2 * np.pi,
        holonomy_lift=np.eye(2, dtype=complex),
        connection=np.array([0.25]),
    )
    cm = spinor_gammas(2)
    spec_a = eigensolve(assemble_dirac(mt_a, cm, 2)).values
    # zeta = k + 1/2; connection shifts the base momentum by -2 pi A zeta
    oracle = []
    for k in range(-2, 2):
        zeta = k + 0.5
        for u in range(-2, 3):
            beta = u - 2 * np.pi * 0.25 * zeta
            lam = np.hypot(zeta, beta)
            oracle.extend([lam, -lam])
    assert np.allclose(spec_a, np.sort(oracle), atol=1e-9)


def test_lift_must_intertwine():
    fiber = FlatTorusModel(np.eye(2), np.zeros(2))
    rng = np.random.default_rng(0)
    z = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    q, _ = np.linalg.qr(z)
    mt = AffineMappingTorus(
        fiber=fiber,
        holonomy=np.array([[0, -1], [1, 0]]),
        base_length=1.0,
        holonomy_lift=q,
    )
    with pytest.raises(ValueError, match="intertwine"):
        assemble_dirac(mt, spinor_gammas(3), 1)
    # identity lift is also wrong for a nontrivial rotation
    mt2 = AffineMappingTorus(
        fiber=fiber,
        holonomy=np.array([[0, -1], [1, 0]]),
        base_length=1.0,
        holonomy_lift=np.eye(2, dtype=complex),
    )
    with pytest.raises(ValueError):
        assemble_dirac(mt2, spinor_gammas(3), 1)


def test_scalar_phase_lift_allowed():
    # scalars intertwine trivially; they twist the base boundary condition
    phase = np.exp(0.3j)
    fiber = FlatTorusModel(np.array([[2 * np.pi]]), np.array([0.0]))
    mt = AffineMappingTorus(
        fiber=fiber,
        holonomy=np.array([[1]]),
        base_length=2 * np.pi,
        holonomy_lift=phase * np.eye(2),
    )
    cm = spinor_gammas(2)
    spec = eigensolve(assemble_dirac(mt, cm, 1)).values
    theta = 0.3 / (2 * np.pi)
    oracle = []
    for k in range(-1, 2):
        for u in range(-1, 2):
            lam = np.hypot(float(k), u + theta)
            oracle.extend([lam, -lam])
    assert np.allclose(spec, np.sort(oracle), atol=1e-9)


def test_limit_operator_embeds_in_total_spectrum():
    ext3 = exterior_module(3)
    mt = AffineMappingTorus(
        fiber=FlatTorusModel(np.eye(2), np.zeros(2)),
        holonomy=np.array([[0, -1], [1, 0]]),
        base_length=1.0,
    )
    lim = eigensolve(limit_operator(mt, ext3, 2))
    total = eigensolve(assemble_dirac(mt.with_scale(0.05), ext3, 2))
    match = subset_epsilon_close(lim, total, 1e-12)
    assert match.ok and match.max_deviation == 0.0


def test_limit_operator_gates():
    cm = spinor_gammas(2)
    with pytest.raises(EmptyInvariantSpaceError):
        limit_operator(_simple_mapping(fiber_shift=0.5), cm, 2)
    cm3 = spinor_gammas(3)
    mt = AffineMappingTorus(
        fiber=FlatTorusModel(np.eye(2), np.zeros(2)),
        holonomy=np.array([[0, -1], [1, 0]]),
        base_length=1.0,
    )
    # geometric spin lift of the order-4 rotation has no fixed vectors
    with pytest.raises(EmptyInvariantSpaceError):
        limit_operator(mt, cm3, 2)


def test_limit_operator_antiperiodic_frequencies():
    lim = limit_operator(_simple_mapping(), spinor_gammas(2), 3)
    vals = eigensolve(lim).values
    expected = sorted(
        [s * (u + 0.5) for u in range(-3, 4) for s in (+1, -1)]
    )
    assert np.allclose(vals, expected, atol=1e-12)


def test_fiber_invariant_split_cases():
    cm = spinor_gammas(2)
    split = fiber_invariant_split(_simple_mapping().with_scale(0.25), cm, 3)
    assert split.dim == 2
    assert split.gap == pytest.approx(4.0, abs=1e-12)
    assert np.allclose(split.projector @ split.projector, split.projector, atol=1e-12)
    assert int(round(np.trace(split.projector).real)) == 2
    assert split.restricted_operator.dim == 2
    assert np.all(split.restricted_operator.matrix == 0.0)

    # antiperiodic fiber: no parallel sections, gap is the smallest momentum
    split2 = fiber_invariant_split(_simple_mapping(fiber_shift=0.5), cm, 3)
    assert split2.dim == 0
    assert split2.gap == pytest.approx(0.5, abs=1e-12)

    # partial fixed space leaves zero modes in the complement: gap collapses
    ext3 = exterior_module(3)
    mt = AffineMappingTorus(
        fiber=FlatTorusModel(np.eye(2), np.zeros(2)),
        holonomy=np.array([[0, -1], [1, 0]]),
        base_length=1.0,
    )
    split3 = fiber_invariant_split(mt, ext3, 2)
    assert split3.dim == 4
    assert split3.gap == 0.0


def test_invariant_projector_commutes():
    ext3 = exterior_module(3)
    mt = AffineMappingTorus(
        fiber=FlatTorusModel(np.eye(2), np.zeros(2)),
        holonomy=np.array([[0, -1], [1, 0]]),
        base_length=1.0,
    )
    op = assemble_dirac(mt.with_scale(0.2), ext3, 2)
    proj = invariant_projector(op)
    assert np.max(np.abs(proj @ op.matrix - op.matrix @ proj)) < 1e-12
    # one invariant cluster of dimension 4 per base index
    assert int(round(np.trace(proj).real)) == 4 * (2 * 2 + 1)


def test_superconnection_pieces_flat_zeros():
    cm3 = spinor_gammas(3)
    mt = AffineMappingTorus(
        fiber=FlatTorusModel(np.eye(2), np.array([0.5, 0.5])),
        holonomy=-np.eye(2),
        base_length=2 * np.pi,
    )
    pieces = superconnection_pieces(mt, cm3, 2)
    assert np.all(pieces.base_connection_coeffs == 0.0)
    assert np.all(pieces.clifford_curvature == 0.0)
    assert np.all(pieces.zeroth_order == 0.0)
    fiber_vals = eigensolve(pieces.fiber_dirac).values
    assert np.min(np.abs(fiber_vals)) == pytest.approx(np.pi * np.sqrt(2), abs=1e-9)


def test_zeroth_order_term_spinor_cancellation():
    # symmetric-in-(j,k) coefficients mean a torsion-free second fundamental
    # form; the spinor expression then collapses to zero identically
    rng = np.random.default_rng(7)
    cm = spinor_gammas(3)
    omega = np.zeros((3, 3, 3))
    s = rng.standard_normal((3, 3))
    s = 0.5 * (s + s.T)
    omega[2, :2, :2] = s[:2, :2]
    v = zeroth_order_term(cm, omega, (0, 1), (2,))
    assert np.max(np.abs(v)) < 1e-13


def test_zeroth_order_term_nonzero_generic():
    cm = spinor_gammas(3)
    omega = np.zeros((3, 3, 3))
    omega[2, 0, 1] = 1.0  # antisymmetric part survives
    v = zeroth_order_term(cm, omega, (0, 1), (2,))
    assert np.max(np.abs(v)) > 0.1


def test_zeroth_order_term_exterior_hatted_equivalence():
    # on the exterior module the same coefficients reproduce the expression
    # written through the hat family commutators
    rng = np.random.default_rng(5)
    cm = exterior_module(3)
    g, h = cm.gammas, cm.hat_gammas
    omega = np.zeros((3, 3, 3))
    s = rng.standard_normal((3, 3))
    omega[2, :2, :2] = 0.5 * (s + s.T)[:2, :2]
    v = zeroth_order_term(cm, omega, (0, 1), (2,))
    v_hat = np.zeros_like(v)
    for a in (2,):
        for j in (0, 1):
            for k in (0, 1):
                v_hat += -0.25j * omega[a, j, k] * (g[k] @ (h[a] @ h[j] - h[j] @ h[a]))
    assert np.max(np.abs(v - v_hat)) < 1e-12
    assert np.max(np.abs(v - v.conj().T)) < 1e-12


def test_clifford_curvature_term_two_base_directions():
    cm = spinor_gammas(4)
    omega = np.zeros((4, 4, 4))
    omega[2, 3, 0] = 1.0
    omega[3, 2, 0] = -1.0
    t = clifford_curvature_term(cm, omega, (0, 1), (2, 3))
    assert np.max(np.abs(t)) > 0.1
    assert np.max(np.abs(t - t.conj().T)) < 1e-12
    # single base direction: identically zero
    t1 = clifford_curvature_term(cm, omega, (0, 1, 3), (2,))
    assert np.all(t1 == 0.0)


def test_curvature_endomorphism():
    cm = spinor_gammas(3)
    assert np.all(curvature_endomorphism(cm, np.zeros((3, 3, 3, 3))) == 0.0)
    rng = np.random.default_rng(1)
    r = rng.standard_normal((3, 3, 3, 3))
    # impose the symmetries of a curvature tensor
    r = r - np.transpose(r, (1, 0, 2, 3))
    r = r - np.transpose(r, (0, 1, 3, 2))
    r = 0.5 * (r + np.transpose(r, (2, 3, 0, 1)))
    e = curvature_endomorphism(cm, r)
    assert np.max(np.abs(e - e.conj().T)) < 1e-12
    with pytest.raises(ValueError):
        curvature_endomorphism(cm, np.zeros((2, 2, 2, 2)))


def test_frame_bundle_routes_agree():
    cm = spinor_gammas(2)
    for shift in ([0.5, 0.0], [0.0, 0.0], [0.5, 0.5]):
        t2 = FlatTorusModel(np.diag([1.0, 1.4]), np.array(shift))
        sq, lap = frame_bundle_operator(t2, cm, 3)
        m = epsilon_close(sq, lap, 1e-9)
        assert m.ok, m.max_deviation


def test_frame_bundle_validation():
    cm = spinor_gammas(2)
    t2 = FlatTorusModel(np.eye(2), np.zeros(2))
    with pytest.raises(ValueError):
        frame_bundle_operator(t2, cm, 2, group_truncation=0)
    with pytest.raises(ValueError):
        frame_bundle_operator(FlatTorusModel(np.eye(3), np.zeros(3)), spinor_gammas(3), 2)
    with pytest.raises(ValueError):  # non-scalar Casimir
        frame_bundle_operator(t2, exterior_module(2), 2)


def test_eigenvalue_derivative_circle_exact():
    cm = spinor_gammas(1)

    def fam(t):
        return np.array([[(2 * np.pi + t) ** 2]])

    def fam_dot(t):
        return np.array([[2 * (2 * np.pi + t)]])

    length = 2 * np.pi + 0.2
    spectrum = np.sort([(k + 0.5) * 2 * np.pi / length for k in range(-3, 3)])
    for j in (0, 2, 5):
        got = eigenvalue_derivative(
            fam, cm, 3, 0.2, j, spin_shift=np.array([0.5]), gram_dot=fam_dot
        )
        zeta = spectrum[j] * length / (2 * np.pi)
        exact = -2 * np.pi * zeta / length**2
        assert got == pytest.approx(exact, abs=1e-12)


def test_eigenvalue_derivative_refuses_degenerate():
    cm = spinor_gammas(2)
    with pytest.raises(ValueError, match="degenerate"):
        eigenvalue_derivative(lambda t: (1 + t) * np.eye(2), cm, 2, 0.0, 0)


def test_eigenvalue_derivative_index_range():
    cm = spinor_gammas(1)
    with pytest.raises(ValueError, match="out of range"):
        eigenvalue_derivative(lambda t: np.array([[1.0 + t]]), cm, 1, 0.0, 99)


def test_write_matrix_text_roundtrip(tmp_path):
    op = assemble_dirac(_circle(), spinor_gammas(1), 2)
    path = tmp_path / "m.txt"
    write_matrix_text(op, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0].startswith("# rows=4 cols=4")
    rows = []
    for ln in lines[1:]:
        nums = [float(x) for x in ln.split()]
        rows.append([complex(nums[2 * i], nums[2 * i + 1]) for i in range(len(nums) // 2)])
    assert np.array_equal(np.array(rows), op.matrix)
