"""Uniform symmetric z-grid, 3-point Dirichlet Laplacian and tridiagonal eigensolver."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

__all__ = [
    "ZGrid",
    "TridiagonalOperator",
    "Eigenpair",
    "EigenSolverError",
    "build_hamiltonian",
    "lowest_eigenpairs",
    "sturm_count",
    "dirichlet_form",
    "richardson",
]


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ZGrid:
    """Nodes z_j = -L + j*h, j = 0..n-1, with the Dirichlet walls one spacing outside."""

    half_length: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.half_length) and self.half_length > 0):
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        if self.n < 33 or self.n % 2 == 0:
            raise ValueError(f"n must be odd and >= 33, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_length / (self.n - 1)

    @property
    def center(self) -> int:
        return (self.n - 1) // 2

    @property
    def z(self) -> np.ndarray:
        # built from integer offsets so the node at 0 is exact and the grid is exactly symmetric
        return (np.arange(self.n) - self.center) * self.h

    def doubled(self) -> "ZGrid":
        """Twice the box at the same spacing."""
        return ZGrid(2.0 * self.half_length, 2 * self.n - 1)

    def refined(self) -> "ZGrid":
        """Same box at half the spacing."""
        return ZGrid(self.half_length, 2 * self.n - 1)

    def key(self) -> str:
        payload = np.array([self.half_length, float(self.n)], dtype="<f8").tobytes()
        return hashlib.sha256(payload).hexdigest()[:16]

    def integrate(self, f: np.ndarray) -> np.ndarray:
        # trapezoid with vanishing wall values == plain Riemann sum times h
        return np.sum(f, axis=-1) * self.h


@dataclass(frozen=True)
class TridiagonalOperator:
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def __post_init__(self):
        if self.off_diagonal.shape[0] != self.diagonal.shape[0] - 1:
            raise ValueError("off_diagonal must have length n-1")

    @property
    def n(self) -> int:
        return self.diagonal.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out

    def norm(self) -> float:
        """Infinity norm, an upper bound on the spectral radius."""
        row = np.abs(self.diagonal).copy()
        row[:-1] += np.abs(self.off_diagonal)
        row[1:] += np.abs(self.off_diagonal)
        return float(row.max())

    def dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)


@dataclass(frozen=True)
class Eigenpair:
    value: float
    vector: np.ndarray = field(repr=False)


def build_hamiltonian(phi: np.ndarray, grid: ZGrid) -> TridiagonalOperator:
    """-d^2/dz^2 - phi with the 3-point stencil and Dirichlet walls."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.n,):
        raise ValueError(f"phi has shape {phi.shape}, grid needs ({grid.n},)")
    if not np.all(np.isfinite(phi)):
        raise ValueError("phi must be finite everywhere")
    inv_h2 = 1.0 / grid.h**2
    return TridiagonalOperator(2.0 * inv_h2 - phi, np.full(grid.n - 1, -inv_h2))


def sturm_count(op: TridiagonalOperator, mu: float) -> int:
    """Number of eigenvalues strictly below mu (LDL^T inertia)."""
    d = op.diagonal
    e2 = op.off_diagonal**2
    tiny = np.finfo(float).tiny
    count = 0
    q = d[0] - mu
    for j in range(op.n):
        if j > 0:
            q = d[j] - mu - e2[j - 1] / q
        if q == 0.0:
            q = -tiny
        if q < 0.0:
            count += 1
    return count


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """First component above noise made positive, so output is platform independent."""
    for i in range(vectors.shape[1]):
        v = vectors[:, i]
        thresh = 1e-12 * np.max(np.abs(v))
        j = int(np.argmax(np.abs(v) > thresh))
        if v[j] < 0:
            vectors[:, i] = -v
    return vectors


def lowest_eigenpairs(op: TridiagonalOperator, k: int, h: float = 1.0, *, residual_tol: float = 1e-10):
    """The k algebraically smallest eigenpairs, ascending.

    Bisection with Sturm counts followed by inverse iteration (LAPACK stebz/stein).
    Vectors are normalized so that h * sum(v**2) == 1.

    Returns (values, vectors) with vectors of shape (n, k).
    """
    if not 1 <= k <= op.n:
        raise ValueError(f"k must lie in [1, {op.n}], got {k}")
    try:
        values, vectors = eigh_tridiagonal(
            op.diagonal,
            op.off_diagonal,
            select="i",
            select_range=(0, k - 1),
            lapack_driver="stebz",
            tol=2 * np.finfo(float).tiny,
        )
    except LinAlgError as exc:
        raise EigenSolverError(f"inverse iteration failed: {exc}") from exc
    vectors = np.ascontiguousarray(vectors)
    # stein reports non-convergence through zero columns rather than raising in some builds
    norms = np.linalg.norm(vectors, axis=0)
    bad = np.flatnonzero(~np.isfinite(norms) | (norms < 0.5))
    if bad.size:
        raise EigenSolverError(f"inverse iteration did not converge for eigenpair index {int(bad[0])}")
    vectors /= norms
    scale = op.norm()
    for i in range(k):
        r = op.matvec(vectors[:, i]) - values[i] * vectors[:, i]
        if np.linalg.norm(r) > residual_tol * scale:
            raise EigenSolverError(
                f"eigenpair {i} residual {np.linalg.norm(r):.3e} exceeds {residual_tol:.0e}*|H|"
            )
    vectors = _fix_signs(vectors) / np.sqrt(h)
    return values, vectors


def dirichlet_form(vectors: np.ndarray, h: float) -> np.ndarray:
    """h * sum_j ((v_{j+1} - v_j)/h)^2 including the two wall links, per column."""
    v = np.atleast_2d(vectors.T).T if vectors.ndim == 1 else vectors
    padded = np.zeros((v.shape[0] + 2, v.shape[1]))
    padded[1:-1] = v
    diff = np.diff(padded, axis=0)
    out = np.sum(diff**2, axis=0) / h
    return out if vectors.ndim > 1 else out[0]


def richardson(coarse: float, fine: float, order: int = 2) -> tuple[float, float]:
    """Two-grid extrapolation for an O(h^order) quantity: (extrapolated value, error estimate of `fine`)."""
    factor = 2**order - 1
    delta = (fine - coarse) / factor
    return fine + delta, abs(delta)
