"""Effective 1D Coulomb potentials of the lowest-Landau-band orbitals.

V_m(z) = (1/m!) int_0^inf u^m e^-u (2u/B + z^2)^(-1/2) du is the Coulomb potential of the
transverse orbital density |phi_m|^2 seen along the field axis, and the pair potential
V_{m,n} reduces to the V_i through a center-of-mass / relative-coordinate expansion.

With c = B z^2 / 2 we have V_m = sqrt(B/2) J_m(c), J_m(c) = (1/m!) int u^m e^-u (u+c)^-1/2 du.
J_m satisfies (m+1) J_{m+1} = (m + 1/2 - c) J_m + c J_{m-1}, which is stable for small c.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import erfcx, gammaln, roots_laguerre, roots_legendre

from .grid import ZGrid

__all__ = [
    "SizingError",
    "PairCoefficients",
    "PotentialTable",
    "eval_vm",
    "vm_channels",
    "jensen_bounds",
    "pair_coefficients",
    "eval_vmn",
    "orbital_overlap",
    "build_table",
    "save_table",
    "load_table",
    "cached_table",
    "table_cache_key",
    "table_bytes",
    "CACHE_VERSION",
]

CACHE_VERSION = 1

# below this c = B z^2/2 the upward recurrence is used, above it Gauss-Laguerre
_SERIES_MAX_C = 2.0
_GL_START = 64
_GL_MAX = 2048
_GL_RTOL = 1e-10
# sandwich width at which the bound midpoint replaces quadrature
_PINCH_RTOL = 1e-12
# exact rational arithmetic for the pair coefficients up to this m+n
_EXACT_PAIR_MAX = 60


class SizingError(ValueError):
    pass


def _check_args(m: int, B: float) -> None:
    if int(m) != m or m < 0:
        raise ValueError(f"angular index m must be a nonnegative integer, got {m}")
    if not (np.isfinite(B) and B > 0):
        raise ValueError(f"field strength B must be positive, got {B}")


@lru_cache(maxsize=None)
def _laguerre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_laguerre(n)
    keep = w > 0
    return x[keep], np.log(w[keep])


def _j_recurrence(max_m: int, c: np.ndarray) -> np.ndarray:
    out = np.empty((max_m + 1,) + c.shape)
    out[0] = math.sqrt(math.pi) * erfcx(np.sqrt(c))
    if max_m >= 1:
        out[1] = np.sqrt(c) + (0.5 - c) * out[0]
    for m in range(1, max_m):
        out[m + 1] = ((m + 0.5 - c) * out[m] + c * out[m - 1]) / (m + 1)
    return out


def _j_laguerre(ms: np.ndarray, c: np.ndarray, n: int) -> np.ndarray:
    x, lw = _laguerre(n)
    logweights = lw[None, :] + ms[:, None] * np.log(x)[None, :] - gammaln(ms + 1.0)[:, None]
    weights = np.exp(logweights)
    return weights @ (1.0 / np.sqrt(x[:, None] + c[None, :]))


def _j_laguerre_adaptive(ms: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = _GL_START
    prev = _j_laguerre(ms, c, n)
    while True:
        n *= 2
        cur = _j_laguerre(ms, c, n)
        if np.max(np.abs(cur - prev) / np.abs(cur)) < _GL_RTOL or n >= _GL_MAX:
            return cur
        prev = cur


def jensen_bounds(m: int, B: float, z) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds (z^2 + 2(m+1)/B)^-1/2 <= V_m(z) <= (z^2 + 2m/B)^-1/2."""
    z2 = np.asarray(z, dtype=float) ** 2
    lower = 1.0 / np.sqrt(z2 + 2.0 * (m + 1) / B)
    with np.errstate(divide="ignore"):
        upper = 1.0 / np.sqrt(z2 + 2.0 * m / B)
    return lower, upper


def vm_channels(max_m: int, B: float, z) -> np.ndarray:
    """V_0..V_max_m at the points z; shape (max_m + 1,) + z.shape."""
    _check_args(max_m, B)
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    flat = np.abs(z).ravel()
    c = 0.5 * B * flat**2
    out = np.empty((max_m + 1, flat.size))
    ms = np.arange(max_m + 1, dtype=float)

    # relative sandwich width is ~1/(2c) for every m
    pinch = 2.0 * c * _PINCH_RTOL > 1.0
    small = (c <= _SERIES_MAX_C) & ~pinch
    large = (c > _SERIES_MAX_C) & ~pinch
    if small.any():
        out[:, small] = _j_recurrence(max_m, c[small])
    if large.any():
        out[:, large] = _j_laguerre_adaptive(ms, c[large])
    out *= math.sqrt(0.5 * B)
    if pinch.any():
        zz = flat[pinch]
        for m in range(max_m + 1):
            lo, hi = jensen_bounds(m, B, zz)
            out[m, pinch] = 0.5 * (lo + hi)
    return out.reshape((max_m + 1,) + z.shape)


def eval_vm(m: int, B: float, z):
    """V_m(z) for scalar or array z."""
    _check_args(m, B)
    vals = _vm_single(int(m), B, np.asarray(z, dtype=float))
    return float(vals) if np.ndim(z) == 0 else vals


def _vm_single(m: int, B: float, z: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(z)):
        raise ValueError("z must be finite")
    flat = np.abs(z).ravel()
    c = 0.5 * B * flat**2
    out = np.empty(flat.size)
    pinch = 2.0 * c * _PINCH_RTOL > 1.0
    small = (c <= _SERIES_MAX_C) & ~pinch
    large = (c > _SERIES_MAX_C) & ~pinch
    if small.any():
        out[small] = _j_recurrence(m, c[small])[m]
    if large.any():
        out[large] = _j_laguerre_adaptive(np.array([float(m)]), c[large])[0]
    out *= math.sqrt(0.5 * B)
    if pinch.any():
        lo, hi = jensen_bounds(m, B, flat[pinch])
        out[pinch] = 0.5 * (lo + hi)
    return out.reshape(z.shape)


@dataclass(frozen=True)
class PairCoefficients:
    m: int
    n: int
    c: np.ndarray

    def __post_init__(self):
        if self.c.shape != (self.m + self.n + 1,):
            raise ValueError("need m+n+1 coefficients")


@lru_cache(maxsize=None)
def _pair_coefficients_cached(m: int, n: int) -> tuple[float, ...]:
    total = m + n
    # (x+y)^m (x-y)^n, a[i] = coefficient of y^i x^(total-i)
    a = [0] * (total + 1)
    for j in range(m + 1):
        bj = math.comb(m, j)
        for k in range(n + 1):
            a[j + k] += bj * math.comb(n, k) * (-1) ** k
    if total <= _EXACT_PAIR_MAX:
        denom = math.factorial(m) * math.factorial(n) * 2**total
        return tuple(
            float(Fraction(a[i] ** 2 * math.factorial(i) * math.factorial(total - i), denom))
            for i in range(total + 1)
        )
    out = []
    base = math.lgamma(m + 1) + math.lgamma(n + 1) + total * math.log(2.0)
    for i in range(total + 1):
        if a[i] == 0:
            out.append(0.0)
            continue
        lg = 2 * math.log(abs(a[i])) + math.lgamma(i + 1) + math.lgamma(total - i + 1) - base
        out.append(math.exp(lg))
    return tuple(out)


def pair_coefficients(m: int, n: int) -> PairCoefficients:
    """Weights c_i >= 0, sum 1, with sqrt(2) V_{m,n}(sqrt(2) z) = sum_i c_i V_i(z)."""
    for k in (m, n):
        if int(k) != k or k < 0:
            raise ValueError(f"angular indices must be nonnegative integers, got {(m, n)}")
    return PairCoefficients(int(m), int(n), np.array(_pair_coefficients_cached(int(m), int(n))))


def eval_vmn(m: int, n: int, B: float, z):
    """V_{m,n}(z) = 2^-1/2 sum_i c_i V_i(z / sqrt 2)."""
    _check_args(m, B)
    _check_args(n, B)
    coeffs = pair_coefficients(m, n).c
    z_arr = np.asarray(z, dtype=float)
    vals = np.tensordot(coeffs, vm_channels(m + n, B, z_arr / math.sqrt(2.0)), axes=1) / math.sqrt(2.0)
    return float(vals) if np.ndim(z) == 0 else vals


def orbital_overlap(m: int, n: int, B: float) -> float:
    """int |phi_m|^2 |phi_n|^2 dx_perp = (B/2pi) (m+n)! / (m! n! 2^(m+n+1))."""
    _check_args(m, B)
    _check_args(n, B)
    logv = math.lgamma(m + n + 1) - math.lgamma(m + 1) - math.lgamma(n + 1) - (m + n + 1) * math.log(2.0)
    return B / (2 * math.pi) * math.exp(logv)


# ---------------------------------------------------------------------------
# cell averages used by the discretized functional
# ---------------------------------------------------------------------------

_GL_CELL = 12


@lru_cache(maxsize=None)
def _legendre01(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(q)
    return 0.5 * (x + 1.0), 0.5 * w


def _hat(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


def _bspline3(x):
    ax = np.abs(x)
    inner = 2.0 / 3.0 - ax**2 + 0.5 * ax**3
    outer = (2.0 - ax) ** 3 / 6.0
    return np.where(ax <= 1.0, inner, np.where(ax <= 2.0, outer, 0.0))


def _smoothing_nodes(offsets: np.ndarray, support: int, kernel, fine_cells: float):
    """Quadrature for int f(d + x) K(x) dx, x in [-support, support], one rule per offset d.

    Unit cells never straddle the cusp at 0 (offsets are integers); the cells touching 0 get a
    geometric grading down to `fine_cells` so that features much narrower than a cell resolve.
    Returns (index into offsets, abscissa d + x, weight).
    """
    t, w = _legendre01(_GL_CELL)
    idx, pts, wts = [], [], []
    levels = max(0, int(math.ceil(math.log2(1.0 / fine_cells)))) if fine_cells < 1.0 else 0
    for k in range(-support, support):
        lo = offsets + k  # cell [lo, lo+1] in units of h
        touching = (lo == 0) | (lo == -1)
        reg = np.flatnonzero(~touching)
        if reg.size:
            xs = lo[reg, None] + t[None, :]
            idx.append(np.repeat(reg, t.size))
            pts.append(xs.ravel())
            wts.append((w[None, :] * kernel(xs - offsets[reg, None])).ravel())
        near = np.flatnonzero(touching)
        if near.size:
            # subintervals of [0, 1] in |distance from 0|, graded towards 0
            edges = [0.0] + [2.0**-j for j in range(levels, -1, -1)]
            for a, b in zip(edges[:-1], edges[1:]):
                s = a + (b - a) * t
                sw = (b - a) * w
                for i in near:
                    # the cell is [0,1] if lo == 0 else [-1,0]
                    xs = s if lo[i] == 0 else -s
                    idx.append(np.full(t.size, i))
                    pts.append(xs)
                    wts.append(sw * kernel(xs - offsets[i]))
    return np.concatenate(idx), np.concatenate(pts), np.concatenate(wts)


def _smoothed_channels(max_m: int, B: float, h: float, offsets: np.ndarray, *, scale: float, kernel: str) -> np.ndarray:
    """int V_m(scale * h * (d + x)) K(x) dx for each offset d, all m <= max_m."""
    support, fn = (1, _hat) if kernel == "hat" else (2, _bspline3)
    width = math.sqrt(2.0 / B)  # transverse length scale of V_0
    fine = min(1.0, 0.05 * width / (scale * h))
    idx, pts, wts = _smoothing_nodes(offsets, support, fn, fine)
    x = np.abs(pts) * (scale * h)
    uniq, inv = np.unique(x, return_inverse=True)
    vals = vm_channels(max_m, B, uniq)[:, inv]
    out = np.zeros((max_m + 1, offsets.size))
    for m in range(max_m + 1):
        out[m] = np.bincount(idx, weights=wts * vals[m], minlength=offsets.size)
    return out


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def _pair_index(max_m: int) -> dict[tuple[int, int], int]:
    pairs = {}
    for m in range(max_m + 1):
        for n in range(m, max_m + 1):
            pairs[(m, n)] = len(pairs)
    return pairs


@dataclass(frozen=True)
class PotentialTable:
    """V_m on the grid nodes and V_{m,n} on the relative lattice d*h, d >= 0 (both even in z).

    `vm`, `vmn` are point values. `vm_avg` (hat-weighted) and `vmn_avg` (cubic B-spline weighted)
    are the Galerkin weights used by the discretized functional; they coincide with the point
    values up to O(h^2) wherever the potential is resolved by the grid.
    """

    B: float
    grid: ZGrid
    max_m: int
    vm_half: np.ndarray = field(repr=False)       # (max_m+1, center+1) on z >= 0
    vm_avg_half: np.ndarray = field(repr=False)
    vmn_half: np.ndarray = field(repr=False)      # (n_pairs, n) on d = 0..n-1
    vmn_avg_half: np.ndarray = field(repr=False)

    def _mirror(self, half: np.ndarray) -> np.ndarray:
        return np.concatenate([half[..., :0:-1], half], axis=-1)

    @property
    def pairs(self) -> dict[tuple[int, int], int]:
        return _pair_index(self.max_m)

    def vm(self, m: int, *, smoothed: bool = False) -> np.ndarray:
        self._check_channel(m)
        return self._mirror((self.vm_avg_half if smoothed else self.vm_half)[m])

    def vm_all(self, channels: int, *, smoothed: bool = False) -> np.ndarray:
        self._check_channel(channels - 1)
        return self._mirror((self.vm_avg_half if smoothed else self.vm_half)[:channels])

    def vmn(self, m: int, n: int, *, smoothed: bool = False) -> np.ndarray:
        """Kernel on the relative lattice d = -(n-1)..(n-1)."""
        self._check_channel(max(m, n))
        key = (min(m, n), max(m, n))
        half = (self.vmn_avg_half if smoothed else self.vmn_half)[self.pairs[key]]
        return self._mirror(half)

    def _check_channel(self, m: int) -> None:
        if m > self.max_m:
            raise SizingError(f"channel {m} not tabulated (table max_m={self.max_m})")

    def cache_key(self) -> str:
        return table_cache_key(self.max_m, self.B, self.grid)


def table_bytes(max_m: int, grid: ZGrid) -> int:
    n_pairs = (max_m + 1) * (max_m + 2) // 2
    return 8 * (2 * (max_m + 1) * (grid.center + 1) + 2 * n_pairs * grid.n)


def build_table(max_m: int, B: float, grid: ZGrid, *, memory_budget: int = 2 * 1024**3) -> PotentialTable:
    _check_args(max_m, B)
    need = table_bytes(max_m, grid)
    if need > memory_budget:
        raise SizingError(
            f"potential table for max_m={max_m}, n={grid.n} needs {need} bytes > budget {memory_budget}"
        )
    h = grid.h
    nodes = np.arange(grid.center + 1)
    vm_half = vm_channels(max_m, B, nodes * h)
    vm_avg_half = _smoothed_channels(max_m, B, h, nodes, scale=1.0, kernel="hat")

    lattice = np.arange(grid.n)
    top = 2 * max_m
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    vi_rel = vm_channels(top, B, lattice * h * inv_sqrt2)
    vi_rel_avg = _smoothed_channels(top, B, h, lattice, scale=inv_sqrt2, kernel="spline")

    pairs = _pair_index(max_m)
    vmn_half = np.empty((len(pairs), grid.n))
    vmn_avg_half = np.empty((len(pairs), grid.n))
    for (m, n), p in pairs.items():
        c = pair_coefficients(m, n).c
        vmn_half[p] = inv_sqrt2 * (c @ vi_rel[: m + n + 1])
        vmn_avg_half[p] = inv_sqrt2 * (c @ vi_rel_avg[: m + n + 1])
    return PotentialTable(float(B), grid, int(max_m), vm_half, vm_avg_half, vmn_half, vmn_avg_half)


# ---------------------------------------------------------------------------
# binary cache: magic, version, B, half_length, n, max_m, then the four arrays (little endian f8)
# ---------------------------------------------------------------------------

_MAGIC = b"DDMPOT\x00\x00"
_HEADER = struct.Struct("<8sIddqq")


def save_table(table: PotentialTable, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{table.cache_key()}.bin"
    header = _HEADER.pack(_MAGIC, CACHE_VERSION, table.B, table.grid.half_length, table.grid.n, table.max_m)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (table.vm_half, table.vm_avg_half, table.vmn_half, table.vmn_avg_half):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def load_table(path: str | Path) -> PotentialTable:
    raw = Path(path).read_bytes()
    magic, version, B, half_length, n, max_m = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != CACHE_VERSION:
        raise ValueError(f"{path}: not a version-{CACHE_VERSION} potential table")
    grid = ZGrid(half_length, n)
    n_pairs = (max_m + 1) * (max_m + 2) // 2
    shapes = [(max_m + 1, grid.center + 1)] * 2 + [(n_pairs, n)] * 2
    arrays, offset = [], _HEADER.size
    for shape in shapes:
        count = shape[0] * shape[1]
        arrays.append(np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float))
        offset += 8 * count
    if offset != len(raw):
        raise ValueError(f"{path}: size mismatch")
    return PotentialTable(B, grid, max_m, *arrays)


def table_cache_key(max_m: int, B: float, grid: ZGrid) -> str:
    return f"v{CACHE_VERSION}-B{float(B):.17g}-g{grid.key()}-m{int(max_m)}"


def cached_table(max_m: int, B: float, grid: ZGrid, cache_dir: str | Path | None) -> PotentialTable:
    """build_table through the on-disk cache when a directory is given."""
    if cache_dir is None:
        return build_table(max_m, B, grid)
    probe = PotentialTable(float(B), grid, int(max_m), *(np.empty((0, 0)),) * 4)
    path = Path(cache_dir) / f"{probe.cache_key()}.bin"
    if path.exists():
        return load_table(path)
    table = build_table(max_m, B, grid)
    save_table(table, cache_dir)
    return table
