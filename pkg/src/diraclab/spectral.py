"""Spectra of assembled operators, multiset comparison, and CSV round trip.

Spectra are ascending sorted arrays tagged with a clustering tolerance and
the truncation that produced them.  Comparisons run over sorted values:
equality of multisets of reals at tolerance eps is exactly pointwise
closeness of the sorted sequences, and subset containment is decided by the
greedy two-pointer injection, which is optimal for sorted sequences.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Spectrum",
    "MatchResult",
    "eigensolve",
    "sinh_rescale",
    "epsilon_close",
    "subset_epsilon_close",
    "window_intersect",
    "cluster_multiplicities",
    "spectrum_to_csv",
    "spectrum_from_csv",
]

RESIDUAL_TOL = 1e-10
HERMITICITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Sorted eigenvalues with a clustering tolerance."""

    values: np.ndarray
    cluster_tol: float
    source_truncation: int | None = None

    def __post_init__(self) -> None:
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        object.__setattr__(self, "values", v)
        if self.cluster_tol < 0.0:
            raise ValueError("cluster tolerance must be nonnegative")

    def __len__(self) -> int:
        return len(self.values)

    def abs_sorted(self) -> np.ndarray:
        """Absolute values, ascending; position k-1 is the k-th smallest."""
        return np.sort(np.abs(self.values))


@dataclass(frozen=True)
class MatchResult:
    """Outcome of a multiset comparison with the witness pairing."""

    ok: bool
    pairs: tuple[tuple[int, int], ...] = field(default=())
    max_deviation: float = 0.0

    def __bool__(self) -> bool:
        return self.ok


def _default_tol(values: np.ndarray) -> float:
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    return 1e-8 * max(1.0, scale)


def eigensolve(op, cluster_tol: float | None = None) -> Spectrum:
    """Eigenvalues of a Hermitian operator, block by block when the operator
    carries block structure, with a residual check on every eigenpair."""
    matrix = np.asarray(getattr(op, "matrix", op), dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError("eigensolve needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(matrix))) if matrix.size else 1.0)
    if matrix.size and float(np.max(np.abs(matrix - matrix.conj().T))) > HERMITICITY_TOL * scale:
        raise ValueError("operator is not Hermitian")
    slices = getattr(op, "block_slices", None) or (slice(0, matrix.shape[0]),)
    chunks = []
    for sl in slices:
        block = matrix[sl, sl]
        if block.size == 0:
            continue
        w, v = np.linalg.eigh(block)
        resid = float(np.max(np.abs(block @ v - v * w)))
        bscale = max(1.0, float(np.max(np.abs(block))))
        if resid > RESIDUAL_TOL * bscale:
            raise RuntimeError(f"eigenpair residual {resid:.3e} exceeds tolerance")
        chunks.append(w)
    values = np.sort(np.concatenate(chunks)) if chunks else np.zeros(0)
    tol = _default_tol(values) if cluster_tol is None else cluster_tol
    return Spectrum(
        values=values,
        cluster_tol=tol,
        source_truncation=getattr(op, "truncation", None),
    )


def sinh_rescale(spec: Spectrum, curvature_bound: float) -> Spectrum:
    """Monotone rescaling asinh(value / sqrt(K)) used by the stability
    estimate; K must be a positive lower-curvature-type constant."""
    if curvature_bound <= 0.0:
        raise ValueError("curvature bound must be positive")
    root = float(np.sqrt(curvature_bound))
    return Spectrum(
        values=np.arcsinh(spec.values / root),
        cluster_tol=spec.cluster_tol / root,
        source_truncation=spec.source_truncation,
    )


def epsilon_close(a: Spectrum, b: Spectrum, eps: float) -> MatchResult:
    """Multiset equality at tolerance eps, with the sorted pairing as
    witness.  Unequal lengths fail outright."""
    if eps < 0.0:
        raise ValueError("tolerance must be nonnegative")
    va, vb = a.values, b.values
    if len(va) != len(vb):
        return MatchResult(ok=False, pairs=(), max_deviation=float("inf"))
    if len(va) == 0:
        return MatchResult(ok=True)
    dev = np.abs(va - vb)
    pairs = tuple((i, i) for i in range(len(va)))
    return MatchResult(
        ok=bool(np.max(dev) <= eps), pairs=pairs, max_deviation=float(np.max(dev))
    )


def subset_epsilon_close(a: Spectrum, b: Spectrum, eps: float) -> MatchResult:
    """Injection of a into b matching every value within eps, if one exists.

    Greedy over the sorted sequences: each a-value takes the earliest unused
    b-value within eps.  For sorted data the greedy choice is safe, so
    failure here means no injection exists at this tolerance.
    """
    if eps < 0.0:
        raise ValueError("tolerance must be nonnegative")
    va, vb = a.values, b.values
    pairs = []
    dev = 0.0
    j = 0
    for i, x in enumerate(va):
        while j < len(vb) and vb[j] < x - eps:
            j += 1
        if j >= len(vb) or vb[j] > x + eps:
            return MatchResult(ok=False, pairs=tuple(pairs), max_deviation=float("inf"))
        pairs.append((i, j))
        dev = max(dev, abs(float(x - vb[j])))
        j += 1
    return MatchResult(ok=True, pairs=tuple(pairs), max_deviation=dev)


def window_intersect(spec: Spectrum, bound: float) -> Spectrum:
    """Restrict to eigenvalues with |value| <= bound; bound may be inf."""
    if not (bound >= 0.0):
        raise ValueError("window bound must be nonnegative")
    keep = spec.values[np.abs(spec.values) <= bound]
    return Spectrum(
        values=keep, cluster_tol=spec.cluster_tol, source_truncation=spec.source_truncation
    )


def cluster_multiplicities(spec: Spectrum) -> list[tuple[float, int]]:
    """(mean value, multiplicity) per cluster, splitting where consecutive
    sorted values gap by more than the cluster tolerance."""
    out: list[tuple[float, int]] = []
    vals = spec.values
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > spec.cluster_tol:
            chunk = vals[start:i]
            out.append((float(np.mean(chunk)), len(chunk)))
            start = i
    return out


def spectrum_to_csv(spec: Spectrum, path) -> None:
    """One eigenvalue per line in full repr precision, after a comment line
    carrying the truncation and tolerance; round trips exactly."""
    lines = [f"# truncation={spec.source_truncation!r} cluster_tol={spec.cluster_tol!r}"]
    lines.extend(repr(float(v)) for v in spec.values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def spectrum_from_csv(path) -> Spectrum:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing spectrum header line")
    header = lines[0][1:].strip()
    fields = dict(part.split("=", 1) for part in header.split())
    trunc = None if fields["truncation"] == "None" else int(fields["truncation"])
    tol = float(fields["cluster_tol"])
    values = np.array([float(ln) for ln in lines[1:]])
    return Spectrum(values=values, cluster_tol=tol, source_truncation=trunc)
