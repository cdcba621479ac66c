"""Flat model geometries: tori, affine mapping tori, metric paths.

All models here are flat.  A torus is R^n modulo the lattice spanned by the
columns of lattice_basis, carrying the constant Euclidean metric; the spin
shift selects one of the 2^n translation characters (0 or 1/2 per lattice
direction).  A mapping torus fibers such a torus over a circle, gluing the
fiber after one base loop by an integer lattice automorphism together with a
unitary lift on the module.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FlatTorusModel",
    "AffineMappingTorus",
    "GeometricData",
    "geometric_data",
    "metric_path",
    "metric_speed",
    "matrix_order",
]


@dataclass(frozen=True, eq=False)
class FlatTorusModel:
    """Flat torus R^n / (lattice_basis Z^n) with a spin shift in {0, 1/2}^n."""

    lattice_basis: np.ndarray
    spin_shift: np.ndarray

    def __post_init__(self) -> None:
        basis = np.atleast_2d(np.asarray(self.lattice_basis, dtype=float))
        shift = np.atleast_1d(np.asarray(self.spin_shift, dtype=float))
        object.__setattr__(self, "lattice_basis", basis)
        object.__setattr__(self, "spin_shift", shift)
        n = basis.shape[0]
        if basis.shape != (n, n):
            raise ValueError("lattice basis must be square")
        if abs(np.linalg.det(basis)) < 1e-12:
            raise ValueError("lattice basis is singular")
        if shift.shape != (n,):
            raise ValueError("spin shift length must match the lattice rank")
        if not np.all(np.isin(shift, (0.0, 0.5))):
            raise ValueError("spin shift entries must be 0 or 1/2")

    @property
    def n(self) -> int:
        return self.lattice_basis.shape[0]

    @property
    def gram(self) -> np.ndarray:
        return self.lattice_basis.T @ self.lattice_basis

    def dual_momentum(self, k: np.ndarray) -> np.ndarray:
        """Physical momentum 2 pi B^-T (k + shift) of the integer mode k."""
        k = np.asarray(k, dtype=float)
        return 2.0 * np.pi * np.linalg.solve(self.lattice_basis.T, k + self.spin_shift)

    def rescaled(self, factor: float) -> "FlatTorusModel":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return FlatTorusModel(factor * self.lattice_basis, self.spin_shift.copy())

    def diameter(self, resolution: int = 64) -> float:
        """Intrinsic diameter, i.e. the covering radius of the lattice.

        Diagonal Gram matrices (rectangles) use the closed form
        sqrt(sum of squared edge lengths) / 2; otherwise the farthest point
        from the lattice is searched on a grid over the fundamental domain.
        """
        g = self.gram
        scale = float(np.max(np.abs(g)))
        if np.max(np.abs(g - np.diag(np.diag(g)))) <= 1e-12 * scale:
            return 0.5 * float(np.sqrt(np.sum(np.diag(g))))
        return _covering_radius_grid(self.lattice_basis, resolution)

    def label(self) -> str:
        basis = ";".join(",".join(repr(float(x)) for x in row) for row in self.lattice_basis)
        shift = ",".join(repr(float(x)) for x in self.spin_shift)
        return f"flat_torus[basis={basis} shift={shift}]"


def _covering_radius_grid(basis: np.ndarray, resolution: int, window: int = 2) -> float:
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2")
    n = basis.shape[0]
    if n > 3:
        raise ValueError("grid diameter search supported up to rank 3")
    axes = [np.arange(resolution) / resolution] * n
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    best = np.full(mesh.shape[0], np.inf)
    offsets = np.stack(
        np.meshgrid(*([np.arange(-window, window + 2)] * n), indexing="ij"), axis=-1
    ).reshape(-1, n)
    for off in offsets:
        d = (mesh - off) @ basis.T
        best = np.minimum(best, np.einsum("ij,ij->i", d, d))
    return float(np.sqrt(np.max(best)))


def matrix_order(m: np.ndarray, cap: int = 1024) -> int:
    """Multiplicative order of an integer matrix, capped."""
    m = np.asarray(m)
    eye = np.eye(m.shape[0], dtype=np.int64)
    p = np.array(m, dtype=np.int64)
    for k in range(1, cap + 1):
        if np.array_equal(p, eye):
            return k
        p = p @ m
    raise ValueError(f"matrix order exceeds cap {cap}; holonomy must be finite")


@dataclass(frozen=True, eq=False)
class AffineMappingTorus:
    """Torus bundle over a circle glued by a finite-order lattice automorphism.

    The fiber is rescaled by fiber_scale; connection is the constant
    horizontal form paired with fiber lattice coordinates (it must be fixed
    by the holonomy for the horizontal distribution to close up).  The spin
    structure on the base circle is base_shift in {0, 1/2}; holonomy_lift is
    the unitary acting on module values after one base loop, or None to
    request the geometric lift computed from the holonomy at assembly time.
    """

    fiber: FlatTorusModel
    holonomy: np.ndarray
    base_length: float
    holonomy_lift: np.ndarray | None = None
    base_shift: float = 0.0
    connection: np.ndarray | None = None
    fiber_scale: float = 1.0

    def __post_init__(self) -> None:
        m = self.fiber.n
        phi = np.asarray(self.holonomy)
        if phi.shape != (m, m):
            raise ValueError("holonomy must be square of the fiber rank")
        if not np.all(phi == np.round(phi)):
            raise ValueError("holonomy must be an integer matrix")
        phi = phi.astype(np.int64)
        object.__setattr__(self, "holonomy", phi)
        if round(np.linalg.det(phi.astype(float))) != 1:
            raise ValueError("holonomy must preserve orientation (determinant 1)")
        g = self.fiber.gram
        if np.max(np.abs(phi.T @ g @ phi - g)) > 1e-10 * max(1.0, float(np.max(np.abs(g)))):
            raise ValueError("holonomy does not preserve the fiber metric")
        matrix_order(phi)  # raises when not finite order
        shift = self.fiber.spin_shift
        if np.max(np.abs(np.mod(phi.T @ shift - shift + 0.5, 1.0) - 0.5)) > 1e-12:
            raise ValueError("fiber spin shift is not holonomy invariant")
        conn = np.zeros(m) if self.connection is None else np.asarray(self.connection, dtype=float)
        if conn.shape != (m,):
            raise ValueError("connection form length must match the fiber rank")
        if np.max(np.abs(phi @ conn - conn)) > 1e-12 * max(1.0, float(np.max(np.abs(conn)))):
            raise ValueError("connection form must be holonomy invariant")
        object.__setattr__(self, "connection", conn)
        if self.base_length <= 0:
            raise ValueError("base length must be positive")
        if self.base_shift not in (0.0, 0.5):
            raise ValueError("base spin shift must be 0 or 1/2")
        if self.fiber_scale <= 0:
            raise ValueError("fiber scale must be positive")
        if self.holonomy_lift is not None:
            lift = np.asarray(self.holonomy_lift, dtype=complex)
            if lift.ndim != 2 or lift.shape[0] != lift.shape[1]:
                raise ValueError("holonomy lift must be a square matrix")
            object.__setattr__(self, "holonomy_lift", lift)

    @property
    def n(self) -> int:
        """Total space dimension: fiber rank plus the base circle."""
        return self.fiber.n + 1

    def scaled_fiber(self) -> FlatTorusModel:
        return self.fiber.rescaled(self.fiber_scale)

    def with_scale(self, eps: float) -> "AffineMappingTorus":
        return dataclasses.replace(self, fiber_scale=eps)

    def label(self) -> str:
        hol = ";".join(",".join(str(int(x)) for x in row) for row in self.holonomy)
        return (
            f"mapping_torus[{self.fiber.label()} holonomy={hol} "
            f"L={self.base_length!r} base_shift={self.base_shift!r} "
            f"A={','.join(repr(float(a)) for a in self.connection)} "
            f"eps={self.fiber_scale!r}]"
        )


@dataclass(frozen=True, eq=False)
class GeometricData:
    """Frame connection coefficients and norm summary of a model.

    omega[a, b, j] are connection coefficients in an adapted orthonormal
    frame, antisymmetric in (a, b).  For the flat models built here every
    entry vanishes, so the curvature, second fundamental form, and
    horizontal curvature norms are exact zeros; flags record why.
    """

    omega: np.ndarray
    norm_r: float
    norm_pi: float
    norm_t: float
    diam_z: float
    flags: tuple[str, ...] = field(default=())


def geometric_data(
    model: FlatTorusModel | AffineMappingTorus, resolution: int = 64
) -> GeometricData:
    """Connection data and fiber diameter of a model."""
    if isinstance(model, FlatTorusModel):
        n = model.n
        return GeometricData(
            omega=np.zeros((n, n, n)),
            norm_r=0.0,
            norm_pi=0.0,
            norm_t=0.0,
            diam_z=model.diameter(resolution),
            flags=("flat metric: curvature vanishes identically",),
        )
    if isinstance(model, AffineMappingTorus):
        n = model.n
        return GeometricData(
            omega=np.zeros((n, n, n)),
            norm_r=0.0,
            norm_pi=0.0,
            norm_t=0.0,
            diam_z=model.scaled_fiber().diameter(resolution),
            flags=(
                "flat total space: curvature vanishes identically",
                "fibers are totally geodesic (parallel flat metrics)",
                "one-dimensional base: horizontal curvature is identically zero",
            ),
        )
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _gram_at(family, t: float) -> np.ndarray:
    g = np.atleast_2d(np.asarray(family(t), dtype=float))
    if g.shape[0] != g.shape[1]:
        raise ValueError("metric family must produce square Gram matrices")
    if np.max(np.abs(g - g.T)) > 1e-10 * max(1.0, float(np.max(np.abs(g)))):
        raise ValueError(f"Gram matrix at t={t} is not symmetric")
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise ValueError(f"Gram matrix at t={t} is not positive definite")
    return g


def metric_speed(family, t: float, fd_step: float = 1e-6) -> float:
    """Metric-relative speed sup_v |d/dt c(v, v)| / c(v, v) at parameter t.

    Equals the largest absolute eigenvalue of c^-1 c-dot; the derivative is
    taken by central differences, so the family must extend slightly past
    the endpoint being queried.
    """
    g = _gram_at(family, t)
    gdot = (np.asarray(family(t + fd_step), dtype=float) - np.asarray(family(t - fd_step), dtype=float)) / (2.0 * fd_step)
    chol = np.linalg.cholesky(g)
    sym = np.linalg.solve(chol, np.linalg.solve(chol, gdot.T).T)
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (sym + sym.T)))))


def metric_path(
    family,
    samples: int = 129,
    fd_step: float = 1e-6,
    t0: float = 0.0,
    t1: float = 1.0,
) -> float:
    """Path length of a metric family: integral of metric_speed over [t0, t1].

    family maps a parameter to a Gram matrix and must be defined on a small
    neighbourhood of the interval (central differences step outside it).
    Composite Simpson quadrature; samples is rounded up to the next odd
    count when necessary.
    """
    if samples < 3:
        raise ValueError("need at least 3 quadrature samples")
    if samples % 2 == 0:
        samples += 1
    ts = np.linspace(t0, t1, samples)
    speeds = np.array([metric_speed(family, float(t), fd_step) for t in ts])
    h = (t1 - t0) / (samples - 1)
    weights = np.ones(samples)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(h / 3.0 * np.dot(weights, speeds))
