import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from ddmatom.hyperstrong import (
    HsParams, L_of_eta, bump_functions, c_lambda, hs_convergence_study, hs_density_comparison,
    hs_energy, hs_grid_minimum, hs_minimizer, hs_result,
)
from ddmatom.scf import scf_solve

ETAS = (1e4, 1e6, 1e8, 1e10)


# --- closed forms ------------------------------------------------------------------------

def test_minimizer_at_origin_strong():
    assert hs_minimizer(2.0, 0.0) == 0.5
    assert hs_minimizer(7.0, 0.0) == 0.5
    assert hs_minimizer(3.0, -2.0) == pytest.approx(2 / 16)


@pytest.mark.parametrize("lam", [0.05, 0.5, 1.0, 1.5, 1.99])
def test_minimizer_mass_saturates(lam):
    mass = 2 * integrate.quad(lambda z: hs_minimizer(lam, z), 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    assert mass == pytest.approx(lam, abs=1e-8)


@pytest.mark.parametrize("lam", [2.0, 3.0, 10.0])
def test_minimizer_mass_strong(lam):
    mass = 2 * integrate.quad(lambda z: hs_minimizer(lam, z), 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    assert mass == pytest.approx(2.0, abs=1e-8)


@settings(max_examples=100)
@given(lam=st.floats(0.01, 1.99))
def test_c_lambda_solves_tanh_relation(lam):
    assert math.tanh(c_lambda(lam)) == pytest.approx((2 - lam) / 2, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("lam", [0.0, 2.0, -1.0, 3.0])
def test_c_lambda_domain(lam):
    with pytest.raises(ValueError):
        c_lambda(lam)


def test_energy_strong_is_minus_one_sixth():
    assert hs_energy(3.0) == pytest.approx(-1 / 6, abs=1e-10)
    assert hs_energy(2.0) == pytest.approx(hs_energy(5.0), abs=1e-10)


def test_energy_lambda_one():
    # the closed form integrates to E(lambda) = -lambda/4 + lambda^2/8 - lambda^3/48, matching -1/6 at 2
    assert hs_energy(1.0) == pytest.approx(-7 / 48, abs=1e-10)
    for lam in (0.3, 1.7):
        assert hs_energy(lam) == pytest.approx(-lam / 4 + lam**2 / 8 - lam**3 / 48, abs=1e-10)


def test_energy_small_lambda():
    assert -0.01 < hs_energy(0.01) < 0


def test_energy_monotone_convex():
    lam = np.linspace(0.05, 4.0, 80)
    e = np.array([hs_energy(x) for x in lam])
    assert np.all(np.diff(e) <= 1e-12)
    assert np.all(e[2:] + e[:-2] - 2 * e[1:-1] >= -1e-8)


@pytest.mark.parametrize("lam", [0.5, 1.0, 3.0])
def test_euler_lagrange(lam):
    z = np.linspace(0.05, 20, 4000)
    s = np.sqrt(hs_minimizer(lam, z))
    h = z[1] - z[0]
    lap = (s[2:] - 2 * s[1:-1] + s[:-2]) / h**2
    mu = -((2 - lam) ** 2) / 16 if lam < 2 else 0.0
    resid = -lap + hs_minimizer(lam, z[1:-1]) * s[1:-1] - mu * s[1:-1]
    assert np.max(np.abs(resid)) < 1e-5


def test_cusp_condition():
    # the delta attraction sets the jump of (sqrt rho)' at the origin to -sqrt(rho(0))
    for lam in (0.5, 1.0, 3.0):
        eps = 1e-7
        s0 = math.sqrt(hs_minimizer(lam, 0.0))
        slope = (math.sqrt(hs_minimizer(lam, eps)) - s0) / eps
        assert 2 * slope == pytest.approx(-s0, rel=1e-5)


@pytest.mark.parametrize("lam", [1.0, 3.0])
def test_grid_minimization_oracle(lam):
    res = hs_grid_minimum(lam, n_half=1000)
    assert res["energy"] == pytest.approx(hs_energy(lam), abs=1e-5)
    assert res["constrained"] == (lam < 2)


# --- L(eta) ------------------------------------------------------------------------------

def test_L_residual():
    for eta in (1.0, 1e-3, 7.0, 1e8, 1e30):
        L = L_of_eta(eta)
        assert abs(math.sqrt(eta) - L * math.sinh(L / 2)) <= 1e-12 * max(1, math.sqrt(eta))


def test_L_small_eta():
    assert L_of_eta(1e-8) == pytest.approx(math.sqrt(2) * 1e-2, rel=1e-4)


def test_L_over_log_eta_trend():
    r = [L_of_eta(e) / math.log(e) for e in (1e6, 1e9, 1e12)]
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(r, r[1:]))


def test_L_increasing():
    etas = np.logspace(-10, 40, 300)
    L = np.array([L_of_eta(e) for e in etas])
    assert np.all(np.diff(L) > 0)
    with pytest.raises(ValueError):
        L_of_eta(0.0)


def test_params_and_result():
    p = HsParams.from_physical(3.0, 1.5, 1.5**3 * 1e6)
    assert p.lam == 2.0 and p.eta == pytest.approx(1e6)
    r = hs_result(HsParams(1.0, 1e6))
    assert r.c_lambda == c_lambda(1.0) and r.energy == hs_energy(1.0)
    assert r.density(0.0) == hs_minimizer(1.0, 0.0)
    assert hs_result(HsParams(3.0, 10.0)).c_lambda is None
    with pytest.raises(ValueError):
        HsParams(0.0, 1.0)


def test_bumps_tile_interval():
    bumps = bump_functions()
    assert len(bumps) == 5
    assert bumps[0].support[0] == pytest.approx(-8) and bumps[-1].support[1] == pytest.approx(8)
    for a, b in zip(bumps, bumps[1:]):
        assert b.support[0] < a.support[1]
    x = np.linspace(-10, 10, 2001)
    for b in bumps:
        v = b(x)
        assert v.max() == pytest.approx(1.0, abs=1e-3) and np.all(v[(x < b.support[0]) | (x > b.support[1])] == 0)


# --- DDM vs HS ---------------------------------------------------------------------------

def test_study_rejects_bad_sweeps():
    with pytest.raises(ValueError):
        hs_convergence_study(1.0, 1.0, [1e6, 1e4])
    with pytest.raises(ValueError):
        hs_convergence_study(1.0, 1.0, [0.5, 1e4])


def test_lambda_one_trend(study):
    rows = study(1.0, 1.0, ETAS)
    d = [r["distance"] for r in rows]
    assert all(r["converged"] for r in rows)
    assert all(b < a for a, b in zip(d, d[1:]))
    disc = [r["density_discrepancy"] for r in rows]
    assert all(b < a for a, b in zip(disc, disc[1:]))


def test_uniform_in_Z(study):
    a, b = study(1.0, 1.0, ETAS), study(1.0, 2.0, ETAS)
    assert abs(a[-1]["ratio"] - b[-1]["ratio"]) < 0.1


@pytest.mark.slow
def test_lambda_three_density_trend(study):
    rows = study(3.0, 1.0, ETAS)
    disc = [r["density_discrepancy"] for r in rows]
    assert all(b < a for a, b in zip(disc, disc[1:]))
    d = [r["distance"] for r in rows]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_density_comparison_deterministic_and_small_lambda():
    rep = scf_solve(1.0, 1.0, 1e6)
    assert hs_density_comparison(1.0, 1.0, 1e6, report=rep) == hs_density_comparison(1.0, 1.0, 1e6, report=rep)
    assert hs_density_comparison(1e-6, 1.0, 1e6) < 1e-5
