"""Clifford modules for the rotation and spin groups.

A module is a Hermitian vector space V together with matrices gamma[j]
acting on it, one per direction of R^n, satisfying

    gamma[a] gamma[b] + gamma[b] gamma[a] = 2 delta_ab,   gamma[a]* = gamma[a],

and rotation generators sigma[a, b] (anti-Hermitian, antisymmetric in the
index pair) obeying the so(n) bracket relations

    [sigma_ab, sigma_cd] = d_ad sigma_bc - d_ac sigma_bd
                         + d_bc sigma_ad - d_bd sigma_ac,
    [gamma_a, sigma_bc]  = d_ab gamma_c - d_ac gamma_b.

Throughout, so(n) carries the inner product <X, Y> = -tr(XY)/2 on the
defining representation, which makes the elementary rotations
E_ab - E_ba (a < b) an orthonormal basis for every n, including n = 2
where the Killing form degenerates.  The Casimir of a module is computed
against that basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, schur

__all__ = [
    "CliffordModule",
    "HolonomyRep",
    "spinor_gammas",
    "exterior_module",
    "relation_residuals",
    "casimir",
    "casimir_blocks",
    "holonomy_rep",
    "fixed_subspace",
    "lift_rotation",
]

_PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
_PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_ID2 = np.eye(2, dtype=complex)

RELATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CliffordModule:
    """Finite-dimensional Clifford module.

    gammas has shape (n, dim_v, dim_v); sigmas has shape (n, n, dim_v, dim_v)
    with sigmas[a, a] = 0 and sigmas[b, a] = -sigmas[a, b].  For modules built
    from creation/annihilation pairs, hat_gammas holds the auxiliary
    anticommuting family used to assemble the sigmas.
    """

    n: int
    group: str  # "spin" or "rotation"
    dim_v: int
    gammas: np.ndarray
    sigmas: np.ndarray
    hat_gammas: np.ndarray | None = field(default=None)

    def gamma(self, v: np.ndarray) -> np.ndarray:
        """Clifford action of a vector v in R^n."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"vector must have shape ({self.n},), got {v.shape}")
        return np.einsum("j,jkl->kl", v, self.gammas)

    def validate(self, tol: float = RELATION_TOL) -> None:
        res = relation_residuals(self)
        worst = max(res.values())
        if worst > tol:
            bad = max(res, key=res.get)
            raise ValueError(f"module relations violated: {bad} residual {worst:.3e}")


def _opnorm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, ord=2))


def _kron_chain(mats: list[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0.0j]])
    for m in mats:
        out = np.kron(out, m)
    return out


def _quarter_commutators(gammas: np.ndarray, hats: np.ndarray | None = None) -> np.ndarray:
    n, d, _ = gammas.shape
    sig = np.zeros((n, n, d, d), dtype=complex)
    for a in range(n):
        for b in range(a + 1, n):
            s = 0.25 * (gammas[a] @ gammas[b] - gammas[b] @ gammas[a])
            if hats is not None:
                s = s + 0.25 * (hats[a] @ hats[b] - hats[b] @ hats[a])
            sig[a, b] = s
            sig[b, a] = -s
    return sig


def spinor_gammas(n: int) -> CliffordModule:
    """Spinor module on C^(2^floor(n/2)) from the Pauli tensor tower.

    Valid for 1 <= n <= 8.  The rotation generators are the quarter
    commutators sigma_ab = [gamma_a, gamma_b] / 4.
    """
    if not 1 <= n <= 8:
        raise ValueError(f"spinor module supported for 1 <= n <= 8, got {n}")
    m = n // 2
    mats: list[np.ndarray] = []
    for k in range(m):
        pre = [_PAULI_Z] * k
        post = [_ID2] * (m - k - 1)
        mats.append(_kron_chain(pre + [_PAULI_X] + post))
        mats.append(_kron_chain(pre + [_PAULI_Y] + post))
    if n % 2 == 1:
        mats.append(_kron_chain([_PAULI_Z] * m))
    gammas = np.array(mats)
    cm = CliffordModule(
        n=n,
        group="spin",
        dim_v=2**m,
        gammas=gammas,
        sigmas=_quarter_commutators(gammas),
    )
    cm.validate()
    return cm


def exterior_module(n: int) -> CliffordModule:
    """Complexified exterior-algebra module on C^(2^n).

    Basis vectors are index subsets encoded as bitmasks.  With E_j exterior
    multiplication and I_j = E_j* contraction,

        gamma_j = i (E_j - I_j),      hat_gamma_j = E_j + I_j,

    and the rotation generators combine both families,
    sigma_ab = ([gamma_a, gamma_b] + [hat_a, hat_b]) / 4.  Valid for
    1 <= n <= 6.
    """
    if not 1 <= n <= 6:
        raise ValueError(f"exterior module supported for 1 <= n <= 6, got {n}")
    dim = 2**n
    create = np.zeros((n, dim, dim))
    for j in range(n):
        bit = 1 << j
        for s in range(dim):
            if s & bit:
                continue
            # sign counts basis factors below j already present in s
            sign = -1.0 if bin(s & (bit - 1)).count("1") % 2 else 1.0
            create[j, s | bit, s] = sign
    gammas = np.array([1.0j * (create[j] - create[j].T) for j in range(n)])
    hats = np.array([(create[j] + create[j].T).astype(complex) for j in range(n)])
    cm = CliffordModule(
        n=n,
        group="rotation",
        dim_v=dim,
        gammas=gammas,
        sigmas=_quarter_commutators(gammas, hats),
        hat_gammas=hats,
    )
    cm.validate()
    return cm


def relation_residuals(cm: CliffordModule) -> dict[str, float]:
    """Operator-norm residuals of every defining relation of the module."""
    n, d = cm.n, cm.dim_v
    eye = np.eye(d)
    g, s = cm.gammas, cm.sigmas
    res: dict[str, float] = {
        "gamma_hermitian": 0.0,
        "clifford": 0.0,
        "sigma_antihermitian": 0.0,
        "sigma_antisymmetric": 0.0,
        "so_bracket": 0.0,
        "vector_bracket": 0.0,
    }
    for a in range(n):
        res["gamma_hermitian"] = max(res["gamma_hermitian"], _opnorm(g[a] - g[a].conj().T))
        for b in range(n):
            anti = g[a] @ g[b] + g[b] @ g[a] - 2.0 * (a == b) * eye
            res["clifford"] = max(res["clifford"], _opnorm(anti))
            res["sigma_antihermitian"] = max(
                res["sigma_antihermitian"], _opnorm(s[a, b] + s[a, b].conj().T)
            )
            res["sigma_antisymmetric"] = max(
                res["sigma_antisymmetric"], _opnorm(s[a, b] + s[b, a])
            )
    for a in range(n):
        for b in range(n):
            for c in range(n):
                lhs = g[a] @ s[b, c] - s[b, c] @ g[a]
                rhs = (a == b) * g[c] - (a == c) * g[b]
                res["vector_bracket"] = max(res["vector_bracket"], _opnorm(lhs - rhs))
                for e in range(n):
                    lhs2 = s[a, b] @ s[c, e] - s[c, e] @ s[a, b]
                    rhs2 = (
                        (a == e) * s[b, c]
                        - (a == c) * s[b, e]
                        + (b == c) * s[a, e]
                        - (b == e) * s[a, c]
                    )
                    res["so_bracket"] = max(res["so_bracket"], _opnorm(lhs2 - rhs2))
    if cm.hat_gammas is not None:
        h = cm.hat_gammas
        hat_res = 0.0
        for a in range(n):
            hat_res = max(hat_res, _opnorm(h[a] - h[a].conj().T))
            for b in range(n):
                hat_res = max(hat_res, _opnorm(h[a] @ h[b] + h[b] @ h[a] - 2.0 * (a == b) * eye))
                hat_res = max(hat_res, _opnorm(g[a] @ h[b] + h[b] @ g[a]))
        res["hat_family"] = hat_res
    return res


def _casimir_matrix(cm: CliffordModule) -> np.ndarray:
    c = np.zeros((cm.dim_v, cm.dim_v), dtype=complex)
    for a in range(cm.n):
        for b in range(a + 1, cm.n):
            c -= cm.sigmas[a, b] @ cm.sigmas[a, b]
    return c


def casimir(cm: CliffordModule, tol: float = 1e-10) -> float:
    """Casimir scalar c_V with -sum_{a<b} sigma_ab^2 = c_V Id.

    Raises if the sum is not scalar on V (reducible modules mixing
    inequivalent blocks); use casimir_blocks for those.
    """
    c = _casimir_matrix(cm)
    value = np.trace(c).real / cm.dim_v
    dev = _opnorm(c - value * np.eye(cm.dim_v))
    if dev > tol * max(1.0, abs(value)):
        raise ValueError(
            f"casimir not scalar on this module (deviation {dev:.3e}); "
            "use casimir_blocks"
        )
    return float(value)


def casimir_blocks(cm: CliffordModule, tol: float = 1e-8) -> list[tuple[float, int]]:
    """Casimir values with multiplicities, one entry per isotypic eigenvalue.

    The Casimir matrix is Hermitian positive semidefinite, and constant on
    each irreducible summand, so its eigenvalue clusters report the values
    carried by the isotypic blocks.
    """
    vals = np.linalg.eigvalsh(_casimir_matrix(cm))
    out: list[tuple[float, int]] = []
    for v in vals:
        if out and abs(v - out[-1][0]) <= tol:
            prev, mult = out[-1]
            # running mean keeps the reported value centered on the cluster
            out[-1] = ((prev * mult + v) / (mult + 1), mult + 1)
        else:
            out.append((float(v), 1))
    return [(float(v), m) for v, m in out]


# ---------------------------------------------------------------------------
# finite unitary holonomy


@dataclass(frozen=True, eq=False)
class HolonomyRep:
    """Finite group of unitaries on V, closed under products and inverses."""

    dim_v: int
    generators: tuple[np.ndarray, ...]
    elements: tuple[np.ndarray, ...]
    group_order: int


def _unitary_key(u: np.ndarray, digits: int = 9) -> bytes:
    # adding 0.0 maps -0.0 to +0.0 so both round to identical bytes
    return (np.round(u, digits) + 0.0).tobytes()


def holonomy_rep(
    generators: list[np.ndarray] | tuple[np.ndarray, ...],
    max_order: int = 1024,
    tol: float = 1e-10,
) -> HolonomyRep:
    """Close a generating set of unitaries into a finite group.

    Breadth-first products with rounded-entry deduplication; raises if a
    generator is not unitary or the closure exceeds max_order elements.
    """
    gens = [np.asarray(g, dtype=complex) for g in generators]
    if not gens:
        raise ValueError("at least one generator required")
    d = gens[0].shape[0]
    eye = np.eye(d, dtype=complex)
    for g in gens:
        if g.shape != (d, d):
            raise ValueError("generators must share a square shape")
        if _opnorm(g.conj().T @ g - eye) > tol:
            raise ValueError("generator is not unitary")
    elements = {_unitary_key(eye): eye}
    frontier = [eye]
    while frontier:
        nxt = []
        for e in frontier:
            for g in gens:
                p = g @ e
                k = _unitary_key(p)
                if k not in elements:
                    if len(elements) >= max_order:
                        raise ValueError(
                            f"holonomy closure exceeded {max_order} elements; "
                            "generators do not span a small finite group"
                        )
                    elements[k] = p
                    nxt.append(p)
        frontier = nxt
    elems = tuple(elements.values())
    return HolonomyRep(dim_v=d, generators=tuple(gens), elements=elems, group_order=len(elems))


def fixed_subspace(rep: HolonomyRep, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the subspace fixed by the whole group.

    Uses the averaging projector P = |F|^-1 sum_g g, which is an orthogonal
    projection because the group is closed under adjoints.
    """
    p = sum(rep.elements) / rep.group_order
    if _opnorm(p - p.conj().T) > tol:
        raise ValueError("averaging operator failed to be Hermitian")
    vals, vecs = np.linalg.eigh(p)
    keep = vals > 0.5
    if np.any((vals > tol) & (vals < 1.0 - tol)):
        raise ValueError("averaging operator is not a projector")
    return vecs[:, keep]


def _special_orthogonal_log(rot: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Real antisymmetric Omega with exp(Omega) = rot, for rot in SO(n).

    The principal matrix logarithm of a rotation by pi is complex, so this
    goes through the real Schur form instead: 2 x 2 blocks give plane
    rotations directly and -1 eigenvalues are paired into pi-rotations.
    """
    n = rot.shape[0]
    t, z = schur(rot, output="real")
    log_t = np.zeros((n, n))
    minus_ones: list[int] = []
    i = 0
    while i < n:
        if i + 1 < n and abs(t[i + 1, i]) > tol:
            c, s = t[i, i], t[i + 1, i]
            if abs(t[i, i] - t[i + 1, i + 1]) > 1e-8 or abs(t[i, i + 1] + s) > 1e-8:
                raise ValueError("Schur block of an orthogonal matrix is malformed")
            theta = np.arctan2(s, c)
            log_t[i, i + 1] = -theta
            log_t[i + 1, i] = theta
            i += 2
        else:
            if t[i, i] < 0:
                minus_ones.append(i)
            i += 1
    if len(minus_ones) % 2:
        raise ValueError("odd number of -1 eigenvalues; matrix is not special orthogonal")
    for i, j in zip(minus_ones[0::2], minus_ones[1::2]):
        log_t[i, j] = -np.pi
        log_t[j, i] = np.pi
    return z @ log_t @ z.T


def lift_rotation(cm: CliffordModule, rot: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Unitary U on V with U gamma(v) U* = gamma(rot v) for all v.

    rot must be special orthogonal; the lift is exp of a real logarithm of
    the rotation pushed through the sigma generators.  The intertwining
    property is verified before returning.
    """
    rot = np.asarray(rot, dtype=float)
    n = cm.n
    if rot.shape != (n, n):
        raise ValueError(f"rotation must be {n} x {n}")
    if _opnorm(rot.T @ rot - np.eye(n)) > 1e-10:
        raise ValueError("matrix is not orthogonal")
    if np.linalg.det(rot) < 0:
        raise ValueError("orientation-reversing isometries have no lift here")
    omega = _special_orthogonal_log(rot)
    if _opnorm(expm(omega) - rot) > 1e-9:
        raise ValueError("real logarithm of the rotation failed to verify")
    gen = np.zeros((cm.dim_v, cm.dim_v), dtype=complex)
    for a in range(n):
        for b in range(n):
            gen += 0.5 * omega[a, b] * cm.sigmas[a, b]
    u = expm(gen)
    for j in range(n):
        target = cm.gamma(rot[:, j])
        if _opnorm(u @ cm.gammas[j] @ u.conj().T - target) > tol:
            raise ValueError("computed lift fails to intertwine the Clifford action")
    return u
