"""Independent reference computations used only by the tests."""

from __future__ import annotations

import math
import warnings

import mpmath as mp
import numpy as np
from scipy import integrate, optimize, special


def vm_mpmath(m: int, B: float, z: float, dps: int = 30) -> float:
    """(1/m!) int_0^inf u^m e^-u (2u/B + z^2)^(-1/2) du in extended precision."""
    with mp.workdps(dps):
        B_, z_ = mp.mpf(B), mp.mpf(z)
        f = lambda u: u**m * mp.e**(-u) / mp.sqrt(2 * u / B_ + z_**2)
        val = mp.quad(f, [0, 1, m + 1, 4 * (m + 1), mp.inf]) / mp.factorial(m)
        return float(val)


_BELOW_ONE = float(np.nextafter(1.0, 0.0))


def vmn_2d(m: int, n: int, B: float, z: float) -> float:
    """Direct evaluation of int int |phi_m(x)|^2 |phi_n(y)|^2 / sqrt(|x-y|^2 + z^2).

    In u = B r^2/2, v = B s^2/2 the radial weights are u^m e^-u/m!, and the relative angle
    integral is the complete elliptic integral:
        (1/2pi) int dtheta (A - C cos theta)^(-1/2) = (2/pi) K(2C/(A+C)) / sqrt(A+C).
    """
    lm, ln = math.lgamma(m + 1), math.lgamma(n + 1)

    def inner(v, u):
        A = 2.0 * (u + v) / B + z * z
        C = 4.0 * math.sqrt(u * v) / B
        k2 = min(2.0 * C / (A + C), _BELOW_ONE)   # the ridge itself is integrable
        ang = (2.0 / math.pi) * special.ellipk(k2) / math.sqrt(A + C)
        w = math.exp(m * math.log(u) + n * math.log(v) - u - v - lm - ln) if u > 0 and v > 0 else (
            math.exp(-u - v) if m == 0 and n == 0 else 0.0)
        return w * ang

    def outer(u):
        # the kernel has a logarithmic ridge at v = u when z is small
        a = integrate.quad(inner, 0.0, u, args=(u,), epsabs=1e-12, epsrel=1e-10, limit=200)[0] if u > 0 else 0.0
        b = integrate.quad(inner, u, u + 40.0 + 2 * n, args=(u,), epsabs=1e-12, epsrel=1e-10, limit=200)[0]
        return a + b

    hi = 40.0 + 2 * m
    with warnings.catch_warnings():
        # at z = 0 QUADPACK complains about the log ridge but still lands well inside 1e-9
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(outer, 0.0, hi, epsabs=1e-11, epsrel=1e-10, limit=200, points=[m + 1.0])[0]


def overlap_radial(m: int, n: int, B: float) -> float:
    """int |phi_m|^2 |phi_n|^2 d^2x by radial quadrature (u = B r^2/2, d^2x = (2 pi / B) du)."""
    f = lambda u: (u ** (m + n) * math.exp(-2 * u) / (math.factorial(m) * math.factorial(n)))
    val = integrate.quad(f, 0, np.inf, epsabs=1e-14, epsrel=1e-12)[0]
    return (B / (2 * math.pi)) ** 2 * (2 * math.pi / B) * val


def single_orbital_minimum(table, Z: float, *, x0=None) -> float:
    """min over normalized psi of the discretized one-orbital functional, by L-BFGS on the sphere.

    Uses only the table's Galerkin weights; the convolution goes through scipy.signal, so
    nothing is shared with the SCF loop beyond the discretization itself.
    """
    grid = table.grid
    h = grid.h
    va = table.vm(0, smoothed=True)
    kern = table.vmn(0, 0, smoothed=True)
    n = grid.n

    def energy(u):
        s = 1.0 / math.sqrt(h * float(u @ u))
        psi = s * u
        d = np.diff(np.concatenate([[0.0], psi, [0.0]]))
        kin = float(d @ d) / h
        rho = psi * psi
        w = h * _conv(rho, kern, n)
        e = kin - Z * h * float(va @ rho) + 0.5 * h * float(rho @ w)
        # gradient in psi, then projected through the normalization
        g = (2.0 / h) * (d[:-1] - d[1:]) - 2.0 * Z * h * va * psi + 2.0 * h * w * psi
        g_u = s * (g - h * float(g @ psi) * psi)
        return e, g_u

    if x0 is None:
        x0 = np.exp(-np.abs(grid.z))
    res = optimize.minimize(energy, x0, jac=True, method="L-BFGS-B",
                            options={"maxiter": 20000, "gtol": 1e-12, "ftol": 1e-16, "maxcor": 30})
    return float(res.fun)


def _conv(rho, kern, n):
    from scipy.signal import fftconvolve
    return fftconvolve(rho, kern)[n - 1 : 2 * n - 1]


def dense_lowest(op, k: int) -> np.ndarray:
    return np.linalg.eigvalsh(op.dense())[:k]
