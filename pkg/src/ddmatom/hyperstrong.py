"""Hyper-strong limit: the 1D delta-attraction functional, its explicit minimizer, L(eta),
and the comparison of DDM solutions against it as eta = B/Z^3 grows.

The HS functional is  E(rho) = int (d sqrt(rho)/dz)^2 - rho(0) + (1/2) int rho^2  with
int rho <= lambda. Energies are in units Z^3 (ln eta)^2, lengths in 1/(Z ln eta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "HsParams",
    "HsResult",
    "c_lambda",
    "hs_minimizer",
    "hs_energy",
    "hs_result",
    "hs_grid_minimum",
    "hs_mesh",
    "L_of_eta",
    "bump_functions",
    "hs_convergence_study",
    "hs_density_comparison",
]


@dataclass(frozen=True)
class HsParams:
    lam: float
    eta: float

    def __post_init__(self):
        if not (self.lam > 0 and self.eta > 0):
            raise ValueError(f"lambda and eta must be positive, got {self.lam}, {self.eta}")

    @classmethod
    def from_physical(cls, N: float, Z: float, B: float) -> "HsParams":
        return cls(N / Z, B / Z**3)


@dataclass(frozen=True)
class HsResult:
    energy: float
    c_lambda: float | None
    L_eta: float
    density: Callable[[np.ndarray], np.ndarray] = field(repr=False)


def c_lambda(lam: float) -> float:
    """tanh c = (2 - lambda)/2, i.e. c = (1/2) ln((4 - lambda)/lambda); lambda in (0, 2)."""
    if not 0 < lam < 2:
        raise ValueError(f"c(lambda) is defined for 0 < lambda < 2, got {lam}")
    return 0.5 * math.log((4.0 - lam) / lam)


def hs_minimizer(lam: float, z):
    """Closed-form HS minimizer rho^HS(z)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    z = np.abs(np.asarray(z, dtype=float))
    if lam >= 2:
        out = 2.0 / (2.0 + z) ** 2
    else:
        a = 2.0 - lam
        arg = np.minimum(a * z / 4.0 + c_lambda(lam), 350.0)
        out = 2.0 * a * a / (4.0 * np.sinh(arg)) ** 2
    return out if out.ndim else float(out)


def _hs_parts(lam: float) -> tuple[float, float, float]:
    """(kinetic, -rho(0), repulsion) of the minimizer by adaptive quadrature on z >= 0."""
    def sqrt_rho_prime_sq(z):
        if lam >= 2:
            return 2.0 / (2.0 + z) ** 4
        a = 2.0 - lam
        arg = a * z / 4.0 + c_lambda(lam)
        # sqrt(rho) = (a/(2 sqrt 2)) / sinh(arg); derivative w.r.t. z
        if arg > 350.0:
            return 0.0
        d = (a / (2.0 * math.sqrt(2.0))) * (a / 4.0) / (math.sinh(arg) * math.tanh(arg))
        return d * d

    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=400)
    kin = 2.0 * integrate.quad(sqrt_rho_prime_sq, 0, np.inf, **opts)[0]
    rep = integrate.quad(lambda z: hs_minimizer(lam, z) ** 2, 0, np.inf, **opts)[0]
    return kin, -hs_minimizer(lam, 0.0), rep


def hs_energy(lam: float) -> float:
    """E^HS(lambda) evaluated on the explicit minimizer."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return float(sum(_hs_parts(min(lam, 2.0))))


def L_of_eta(eta: float) -> float:
    """Root of eta^(1/2) = L sinh(L/2), by Newton's method on the logarithm of the equation."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    target = 0.5 * math.log(eta)

    def g(L):
        # log(L sinh(L/2)) without overflow at large L
        half = 0.5 * L
        lsinh = half + math.log1p(-math.exp(-2 * half)) - math.log(2.0) if half > 1 else math.log(math.sinh(half))
        return math.log(L) + lsinh - target

    def dg(L):
        return 1.0 / L + 0.5 / math.tanh(0.5 * L)

    L = max(2.0 * math.log1p(math.sqrt(eta)), math.sqrt(2.0) * eta**0.25)
    for _ in range(200):
        step = g(L) / dg(L)
        new = L - step
        if new <= 0:
            new = 0.5 * L
        if abs(new - L) <= 4e-16 * L:
            L = new
            break
        L = new
    return L


def hs_result(params: HsParams) -> HsResult:
    lam = params.lam
    return HsResult(
        energy=hs_energy(lam),
        c_lambda=c_lambda(lam) if lam < 2 else None,
        L_eta=L_of_eta(params.eta),
        density=lambda z: hs_minimizer(lam, z),
    )


def hs_mesh(n_half: int = 2000, z_max: float = 1e4, grading: float = 0.01) -> np.ndarray:
    """Symmetric mesh with a node at 0, spacing growing geometrically (the tail is algebraic)."""
    delta = math.log1p(z_max / grading) / n_half
    right = grading * np.expm1(delta * np.arange(1, n_half + 1))
    return np.concatenate([-right[::-1], [0.0], right])


def _hs_mesh_energy(psi: np.ndarray, z: np.ndarray) -> tuple[float, np.ndarray]:
    """P1 kinetic term, lumped quartic term, walls one spacing outside the end nodes."""
    h = np.diff(z)
    hh = np.concatenate([[h[0]], h, [h[-1]]])
    w = 0.5 * (hh[:-1] + hh[1:])
    c = psi.size // 2
    d = np.diff(np.concatenate([[0.0], psi, [0.0]]))
    kin = float(np.sum(d * d / hh))
    rep = 0.5 * float(np.sum(w * psi**4))
    e = kin - psi[c] ** 2 + rep
    flux = d / hh
    grad = 2.0 * (flux[:-1] - flux[1:]) + 2.0 * w * psi**3
    grad[c] -= 2.0 * psi[c]
    return e, grad


def hs_grid_minimum(lam: float, n_half: int = 2000, z_max: float = 1e4, grading: float = 0.01) -> dict:
    """Direct minimization of the discretized HS functional with mass <= lambda.

    The unconstrained minimum is computed first; if its mass exceeds lambda the constraint
    is active and the minimum on the sphere int psi^2 = lambda is taken instead
    (psi = sqrt(lambda) u/|u|, L-BFGS in u). Independent of the closed form except for the
    starting point.
    """
    z = hs_mesh(n_half, z_max, grading)
    hh = np.concatenate([[z[1] - z[0]], np.diff(z), [z[-1] - z[-2]]])
    w = 0.5 * (hh[:-1] + hh[1:])
    start = np.sqrt(2.0 / (2.0 + np.abs(z)) ** 2)
    opts = {"maxiter": 50000, "gtol": 1e-13, "ftol": 1e-17, "maxcor": 30}

    free = optimize.minimize(lambda p: _hs_mesh_energy(p, z), start, jac=True, method="L-BFGS-B", options=opts)
    mass = float(np.sum(w * free.x**2))
    if mass <= lam:
        return {"energy": float(free.fun), "mass": mass, "psi": free.x, "z": z, "constrained": False}

    def fixed(u):
        s = math.sqrt(lam / float(np.sum(w * u * u)))
        psi = s * u
        e, g = _hs_mesh_energy(psi, z)
        # project out the normal direction of the mass sphere
        g_u = s * (g - (float(np.dot(g, psi)) / lam) * w * psi)
        return e, g_u

    res = optimize.minimize(fixed, start, jac=True, method="L-BFGS-B", options=opts)
    psi = res.x * math.sqrt(lam / float(np.sum(w * res.x**2)))
    return {"energy": float(res.fun), "mass": lam, "psi": psi, "z": z, "constrained": True}


def bump_functions(count: int = 5, span: float = 8.0):
    """Smooth compactly supported bumps whose supports tile [-span, span] with overlap."""
    width = 2.0 * span / (count + 1)       # half-width of each support
    centers = np.linspace(-span + width, span - width, count)

    def make(c):
        def bump(x):
            t = (np.asarray(x, dtype=float) - c) / width
            out = np.zeros_like(t)
            inside = np.abs(t) < 1
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
            return out
        bump.center = c
        bump.support = (c - width, c + width)
        return bump

    return [make(c) for c in centers]


def _hs_pairings(lam: float) -> np.ndarray:
    out = []
    for b in bump_functions():
        lo, hi = b.support
        out.append(integrate.quad(lambda x: float(b(x)) * hs_minimizer(lam, x), lo, hi,
                                  epsabs=1e-13, epsrel=1e-12, limit=200)[0])
    return np.array(out)


def density_pairings(report, Z: float, eta: float) -> np.ndarray:
    """<rescaled DDM density, bump_k>: (1/Z) int sum_m rho_m(z) b_k(Z ln(eta) z) dz."""
    scale = Z * math.log(eta)
    total = report.densities.total()
    x = report.grid.z * scale
    return np.array([report.grid.h * float(np.sum(total * b(x))) / Z for b in bump_functions()])


def hs_density_comparison(lam: float, Z: float, eta: float, config=None, *, report=None) -> float:
    """Sum over the five bumps of |<rescaled DDM density - rho^HS, bump>|."""
    from .scf import scf_solve

    if report is None:
        report = scf_solve(lam * Z, Z, eta * Z**3, config)
    return float(np.sum(np.abs(density_pairings(report, Z, eta) - _hs_pairings(lam))))


def hs_convergence_study(lam: float, Z: float, eta_values, config=None) -> list[dict]:
    """E^DDM / (Z^3 ln^2 eta) along an increasing eta sweep, with its distance to E^HS(lambda)."""
    from .scf import scf_solve

    etas = [float(e) for e in eta_values]
    if not etas or any(b <= a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta values must be nonempty and strictly increasing")
    if any(e <= 1 for e in etas):
        raise ValueError("eta must exceed 1 (ln eta is the energy scale)")
    target = hs_energy(lam)
    rows = []
    for eta in etas:
        rep = scf_solve(lam * Z, Z, eta * Z**3, config)
        r = rep.energy.total / (Z**3 * math.log(eta) ** 2)
        rows.append({
            "lambda": lam, "Z": Z, "eta": eta, "B": eta * Z**3, "energy": rep.energy.total,
            "ratio": r, "hs_energy": target, "distance": abs(r - target),
            "density_discrepancy": hs_density_comparison(lam, Z, eta, report=rep),
            "L_eta": L_of_eta(eta), "converged": rep.converged, "iterations": rep.iterations,
        })
    return rows
