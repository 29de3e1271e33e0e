"""Effective potentials, the direct (Hartree) term and the DDM energy on the grid.

Densities are arrays of shape (channels, n); row m is rho_m on the grid nodes. The
discretization is the Galerkin one for piecewise-linear densities: attraction weights are
hat-averages of V_m and the pair kernels are cubic-B-spline averages of V_{m,n}
(see PotentialTable), which keeps the discrete Coulomb form positive definite and stays
accurate when the potential peak is narrower than the grid spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .grid import ZGrid, dirichlet_form
from .potentials import PotentialTable, SizingError

__all__ = [
    "DensityProfile",
    "EnergyBreakdown",
    "Convolver",
    "hartree_potential",
    "hartree_naive",
    "effective_potential",
    "direct_energy",
    "pair_energy_matrix",
    "total_energy",
    "dE_dZ",
    "density3d",
    "sqrt_density_kinetic",
]


@dataclass(frozen=True)
class DensityProfile:
    rho: np.ndarray
    grid: ZGrid

    def __post_init__(self):
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        if rho.shape[1] != self.grid.n:
            raise ValueError(f"density rows must have {self.grid.n} nodes, got {rho.shape[1]}")
        object.__setattr__(self, "rho", rho)

    @property
    def channels(self) -> int:
        return self.rho.shape[0]

    @property
    def particle_number(self) -> float:
        return float(np.sum(self.grid.integrate(self.rho)))

    def channel_traces(self) -> np.ndarray:
        return self.grid.integrate(self.rho)

    def total(self) -> np.ndarray:
        return np.sum(self.rho, axis=0)


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    attraction: float
    direct: float
    total: float

    @classmethod
    def from_parts(cls, kinetic: float, attraction: float, direct: float) -> "EnergyBreakdown":
        return cls(float(kinetic), float(attraction), float(direct), float(kinetic + attraction + direct))

    def as_dict(self) -> dict:
        return {"kinetic": self.kinetic, "attraction": self.attraction, "direct": self.direct, "total": self.total}


def _check_table(table: PotentialTable, channels: int, grid: ZGrid | None = None) -> None:
    if channels - 1 > table.max_m:
        raise SizingError(f"density has {channels} channels, table covers m <= {table.max_m}")
    if grid is not None and grid != table.grid:
        raise ValueError("density grid differs from the potential table grid")


class Convolver:
    """W_m = h sum_n K_{m,n} * rho_n for all m at once, by zero-padded real FFTs."""

    def __init__(self, table: PotentialTable, channels: int, *, smoothed: bool = True):
        _check_table(table, channels)
        self.table = table
        self.channels = channels
        self.smoothed = smoothed
        n = table.grid.n
        self.n = n
        self.size = sfft.next_fast_len(3 * n - 2, real=True)
        kf = np.empty((channels, channels, self.size // 2 + 1), dtype=complex)
        for m in range(channels):
            for k in range(m, channels):
                kspec = sfft.rfft(table.vmn(m, k, smoothed=smoothed), self.size)
                kf[m, k] = kspec
                kf[k, m] = kspec
        self._kf = kf

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.atleast_2d(rho)
        c = rho.shape[0]
        if c > self.channels:
            raise SizingError(f"density has {c} channels, convolver built for {self.channels}")
        rf = sfft.rfft(rho, self.size, axis=-1)
        wf = np.einsum("mnk,nk->mk", self._kf[:c, :c], rf)
        full = sfft.irfft(wf, self.size, axis=-1)
        return self.table.grid.h * full[:, self.n - 1 : 2 * self.n - 1]


def hartree_naive(rho: np.ndarray, table: PotentialTable, *, smoothed: bool = True) -> np.ndarray:
    """Direct O(n^2) evaluation of the Hartree potentials (reference for the FFT path)."""
    rho = np.atleast_2d(rho)
    c, n = rho.shape
    _check_table(table, c)
    h = table.grid.h
    out = np.zeros_like(rho)
    for m in range(c):
        for k in range(c):
            kern = table.vmn(m, k, smoothed=smoothed)
            out[m] += h * np.convolve(rho[k], kern)[n - 1 : 2 * n - 1]
    return out


def _rho_array(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, DensityProfile) else np.atleast_2d(np.asarray(rho, dtype=float))


def hartree_potential(m: int, rho, table: PotentialTable, *, smoothed: bool = True) -> np.ndarray:
    r = _rho_array(rho)
    c = max(r.shape[0], m + 1)
    if r.shape[0] < c:
        r = np.vstack([r, np.zeros((c - r.shape[0], r.shape[1]))])
    return Convolver(table, c, smoothed=smoothed)(r)[m]


def effective_potential(m: int, Z: float, rho, table: PotentialTable) -> np.ndarray:
    """Phi_m = Z V_m - W_m with the Galerkin weights."""
    if Z < 0:
        raise ValueError("Z must be nonnegative")
    return Z * table.vm(m, smoothed=True) - hartree_potential(m, rho, table)


def pair_energy_matrix(rho, table: PotentialTable, *, smoothed: bool = True) -> np.ndarray:
    """P_mn = int int V_mn(z-z') rho_m(z) rho_n(z'), exactly symmetric."""
    r = _rho_array(rho)
    c = r.shape[0]
    _check_table(table, c)
    conv = Convolver(table, c, smoothed=smoothed)
    h = table.grid.h
    out = np.zeros((c, c))
    for k in range(c):
        single = np.zeros_like(r)
        single[k] = r[k]
        w = conv(single)
        out[:, k] = h * np.sum(r * w, axis=1)
    return 0.5 * (out + out.T)


def direct_energy(rho, table: PotentialTable, *, smoothed: bool = True) -> float:
    """(1/2) sum_{m,n} P_mn, summed over the upper triangle in a fixed order."""
    p = pair_energy_matrix(rho, table, smoothed=smoothed)
    c = p.shape[0]
    total = 0.0
    for m in range(c):
        total += 0.5 * p[m, m]
        for n in range(m + 1, c):
            total += p[m, n]
    return float(total)


def dE_dZ(rho, table: PotentialTable) -> float:
    """-sum_m int V_m rho_m, the Z-derivative of the energy at the minimizer."""
    r = _rho_array(rho)
    _check_table(table, r.shape[0])
    v = table.vm_all(r.shape[0], smoothed=True)
    return -float(np.sum(table.grid.integrate(v * r)))


def total_energy(channels, Z: float, table: PotentialTable, grid: ZGrid | None = None) -> EnergyBreakdown:
    """Energy of a state given as channel objects with .vectors (n, k) and .occupations (k,)."""
    grid = table.grid if grid is None else grid
    _check_table(table, len(channels), grid)
    if not channels:
        return EnergyBreakdown.from_parts(0.0, 0.0, 0.0)
    kinetic = 0.0
    rho = np.zeros((len(channels), grid.n))
    for idx, ch in enumerate(channels):
        occ = np.asarray(ch.occupations, dtype=float)
        if np.any(occ < 0) or np.any(occ > 1):
            raise ValueError(f"channel {idx}: occupations must lie in [0, 1]")
        if occ.size == 0:
            continue
        vecs = ch.vectors[:, : occ.size]
        kinetic += float(np.dot(occ, dirichlet_form(vecs, grid.h)))
        rho[idx] = (vecs**2) @ occ
    attraction = Z * dE_dZ(rho, table)
    direct = direct_energy(rho, table)
    return EnergyBreakdown.from_parts(kinetic, attraction, direct)


def density3d(rho, B: float, points, grid: ZGrid | None = None) -> np.ndarray:
    """rho~(r, z) = sum_m (B/2pi) u^m e^-u / m! rho_m(z), u = B r^2 / 2, at (r, z) pairs.

    rho_m is linearly interpolated between grid nodes and vanishes outside the box.
    """
    if isinstance(rho, DensityProfile):
        grid, r_arr = rho.grid, rho.rho
    else:
        if grid is None:
            raise ValueError("grid required for raw density arrays")
        r_arr = np.atleast_2d(rho)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    radius, z = pts[:, 0], pts[:, 1]
    u = 0.5 * B * radius**2
    zs = grid.z
    out = np.zeros(pts.shape[0])
    for m in range(r_arr.shape[0]):
        along = np.interp(z, zs, r_arr[m], left=0.0, right=0.0)
        if m == 0:
            logw = -u
        else:
            with np.errstate(divide="ignore"):
                logw = m * np.log(u) - u - math.lgamma(m + 1)
        out += B / (2 * math.pi) * np.exp(logw) * along
    return out


def sqrt_density_kinetic(rho_m: np.ndarray, h: float) -> float:
    """Discrete int |d sqrt(rho)/dz|^2 with the same wall links as the Dirichlet form."""
    return float(dirichlet_form(np.sqrt(np.maximum(rho_m, 0.0)), h))
