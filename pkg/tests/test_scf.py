import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddmatom.grid import ZGrid, build_hamiltonian, dirichlet_form, lowest_eigenpairs
from ddmatom.meanfield import sqrt_density_kinetic
from ddmatom.potentials import SizingError, build_table, cached_table
from ddmatom.scf import (
    GridSizingError, ScfConfig, aufbau_fill, aufbau_form_ok, auto_grid, chemical_potential,
    energy_curve, level_sums, ordering_margins, richardson_estimate, scf_solve, solve_on_table,
)

from oracles import single_orbital_minimum

TIGHT = ScfConfig(energy_tol=1e-12, density_tol=1e-9)


@pytest.fixture(scope="module")
def small():
    """Moderate box shared by the cheaper tests (Z = 3, B = 50)."""
    return build_table(4, 50.0, ZGrid(25.0, 2049))


# --- Aufbau ------------------------------------------------------------------------------

def _eq(a, b):
    assert a.keys() == b.keys()
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])


def test_aufbau_examples():
    _eq(aufbau_fill({0: [-4, -1]}, 1), {0: [1, 0]})
    _eq(aufbau_fill({0: [-4, -2], 1: [-3]}, 2.5), {0: [1, 0.5], 1: [1]})
    _eq(aufbau_fill({0: [-1, 1]}, 3), {0: [1, 0]})
    _eq(aufbau_fill({0: [-1, -0.5]}, 0), {0: [0, 0]})
    _eq(aufbau_fill({0: [-1, -0.5]}, -2), {0: [0, 0]})


def test_aufbau_tie_goes_to_lower_channel():
    _eq(aufbau_fill({0: [-2, -1], 1: [-1]}, 1.5), {0: [1, 0.5], 1: [0]})
    with pytest.raises(ValueError):
        aufbau_fill({0: [np.nan]}, 1)


@settings(max_examples=200)
@given(spectra=st.dictionaries(st.integers(0, 5), st.lists(st.floats(-10, 10), min_size=1, max_size=6), min_size=1),
       N=st.floats(0.01, 30))
def test_aufbau_properties(spectra, N):
    spectra = {m: np.sort(np.array(v)) for m, v in spectra.items()}
    occ = aufbau_fill(spectra, N)
    neg = sum(int(np.sum(v < 0)) for v in spectra.values())
    total = sum(f.sum() for f in occ.values())
    assert total == pytest.approx(min(N, neg), abs=1e-12)
    fractional = sum(int(np.sum((f > 0) & (f < 1))) for f in occ.values())
    assert fractional <= 1
    filled = [spectra[m][i] for m in spectra for i in range(len(spectra[m])) if occ[m][i] > 0]
    empty = [spectra[m][i] for m in spectra for i in range(len(spectra[m])) if occ[m][i] == 0 and spectra[m][i] < 0]
    if filled and empty:
        assert max(filled) <= min(empty)
    for m, f in occ.items():
        assert np.all(f[spectra[m] >= 0] == 0)


# --- config and errors -------------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"energy_tol": 0}, {"density_tol": -1}, {"max_iter": 0}, {"history": -1},
                                {"half_length": 3.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ScfConfig(**kw)


@pytest.mark.parametrize("args", [(0, 1, 1), (1, -1, 1), (1, 1, 0), (float("nan"), 1, 1)])
def test_solve_rejects(args):
    with pytest.raises(ValueError):
        scf_solve(*args)


def test_table_too_small(small):
    with pytest.raises(SizingError):
        solve_on_table(4.5, 3.0, small)


def test_grid_sizing_error():
    with pytest.raises(GridSizingError, match="doublings"):
        scf_solve(1.0, 1.0, 2.0, ScfConfig(max_doublings=0, wall_tol=1e-300))


def test_non_convergence_is_flagged(small, caplog):
    with caplog.at_level(logging.WARNING, logger="ddmatom.scf"):
        rep = solve_on_table(2.5, 3.0, small, ScfConfig(max_iter=1))
    assert not rep.converged and rep.iterations == 1
    assert "not converged" in caplog.text


# --- converged states --------------------------------------------------------------------

def test_converged_basic(small):
    rep = solve_on_table(2.5, 3.0, small, TIGHT)
    assert rep.converged
    assert rep.mu < 0 and rep.mu == chemical_potential(rep)
    assert rep.filled == pytest.approx(2.5, abs=1e-9)
    assert aufbau_form_ok(rep)
    assert rep.energy.total == pytest.approx(rep.aufbau_energy, rel=1e-9)
    assert rep.dE_dZ < 0
    energies = [row["energy"] for row in rep.history]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(energies, energies[1:]))
    assert rep.energy.total <= min(energies) + 1e-12 * abs(rep.energy.total)
    s = rep.summary()
    assert s["energy"]["total"] == rep.energy.total and set(s["occupations"]) == {"0", "1", "2", "3"}
    assert rep.densities.particle_number == pytest.approx(2.5, abs=1e-8)


def test_fixed_point(small):
    rep = solve_on_table(2.5, 3.0, small, TIGHT)
    M = math.ceil(rep.N)
    refill = aufbau_fill({m: rep.channels[m].values for m in range(M)}, rep.N)
    for m in range(M):
        np.testing.assert_allclose(refill[m], rep.channels[m].occupations, atol=1e-8)


def test_channel_truncation(small):
    rep = solve_on_table(2.5, 3.0, small, TIGHT)
    assert len(rep.channels) == 4
    assert rep.channels[3].trace == 0.0
    assert np.all(rep.channels[3].density == 0)


def test_hoffmann_ostenhof(small):
    rep = solve_on_table(3.0, 3.0, small, TIGHT)
    h = small.grid.h
    for ch in rep.channels:
        kin = float(np.dot(ch.occupations, dirichlet_form(ch.vectors, h)))
        assert sqrt_density_kinetic(ch.density, h) <= kin + 1e-8


def test_structure_small(small):
    rep = solve_on_table(3.0, 3.0, small, TIGHT)
    for M in (1, 2):
        sums = level_sums(rep, M)[:3]
        assert np.all(np.diff(sums) > 0)
    first = np.array([ch.values[0] for ch in rep.channels])
    assert first[0] + first[2] <= 2 * first[1] + 1e-6 * abs(first[1])
    margins = ordering_margins(rep)
    assert margins and min(r["margin"] for r in margins) >= -1e-6


def test_small_N_limit():
    grid = ZGrid(40.0, 4097)
    table = build_table(1, 2.0, grid)
    N = 1e-8
    rep = solve_on_table(N, 1.0, table)
    bare, _ = lowest_eigenpairs(build_hamiltonian(table.vm(0, smoothed=True), grid), 1, grid.h)
    assert rep.energy.total / N == pytest.approx(bare[0], rel=1e-6)
    assert rep.mu == pytest.approx(bare[0], rel=1e-6)


def test_single_orbital_oracle_small_grid():
    table = build_table(1, 2.0, ZGrid(20.0, 801))
    rep = solve_on_table(1.0, 1.0, table, TIGHT)
    assert rep.energy.total == pytest.approx(single_orbital_minimum(table, 1.0), rel=1e-6)


def test_derivative_in_N(small):
    N, dN = 2.5, 1e-4 * 2.5
    ep = solve_on_table(N + dN, 3.0, small, TIGHT).energy.total
    em = solve_on_table(N - dN, 3.0, small, TIGHT).energy.total
    mu = solve_on_table(N, 3.0, small, TIGHT).mu
    assert abs((ep - em) / (2 * dN) - mu) <= max(1e-4 * abs(mu), 1e-8)


def test_right_derivative_at_integer(small):
    N, dN = 2.0, 1e-5
    rep = solve_on_table(N, 3.0, small, TIGHT)
    ep = solve_on_table(N + dN, 3.0, small, TIGHT).energy.total
    first_empty = min(float(ch.values[np.count_nonzero(ch.occupations > 0.5)]) for ch in rep.channels)
    assert (ep - rep.energy.total) / dN == pytest.approx(first_empty, rel=1e-3)


def test_derivative_in_Z(small):
    Z, dZ = 3.0, 3e-3
    rep = solve_on_table(2.5, Z, small, TIGHT)
    ep = solve_on_table(2.5, Z + dZ, small, TIGHT).energy.total
    em = solve_on_table(2.5, Z - dZ, small, TIGHT).energy.total
    assert (ep - em) / (2 * dZ) == pytest.approx(rep.dE_dZ, rel=1e-3)


def test_energy_curve_warm_equals_cold(small):
    Ns = [0.5, 1.5, 2.5, 3.5]
    warm = energy_curve(3.0, 50.0, Ns, TIGHT, table=small)
    cold = energy_curve(3.0, 50.0, Ns, TIGHT, table=small, warm=False)
    for a, b in zip(warm, cold):
        assert a.energy.total == pytest.approx(b.energy.total, abs=2 * TIGHT.energy_tol * abs(b.energy.total))
    e = np.array([r.energy.total for r in warm])
    assert np.all(np.diff(e) <= 1e-10)
    assert np.all(e[2:] + e[:-2] - 2 * e[1:-1] >= -1e-8)
    with pytest.raises(ValueError):
        energy_curve(3.0, 50.0, [], table=small)


def test_plateau_beyond_ionization():
    table = build_table(4, 10.0, ZGrid(60.0, 4097))
    a = solve_on_table(3.0, 1.0, table)
    b = solve_on_table(4.0, 1.0, table)
    assert a.converged and b.converged
    assert a.mu == 0.0 and b.mu == 0.0
    assert a.filled < 3.0 and a.filled == pytest.approx(b.filled, abs=1e-6)
    assert b.energy.total == pytest.approx(a.energy.total, abs=2e-9 * abs(a.energy.total))


def test_auto_grid_passes_wall_test(solve):
    rep = solve(1.0, 1.0, 2.0)
    assert rep.converged
    assert np.max(np.abs(rep.rho[:, [0, -1]])) < 1e-10
    assert rep.grid.n >= auto_grid(1.0, 2.0).n


def test_richardson_robustness():
    cfg = ScfConfig(energy_tol=1e-12, density_tol=1e-9)
    grid = ZGrid(25.0, 2049)
    est = richardson_estimate(2.5, 3.0, 50.0, cfg, grid=grid)
    finer = solve_on_table(2.5, 3.0, cached_table(3, 50.0, grid.refined(), None), cfg).energy.total
    assert abs(finer - est["fine"]) < 4 * est["error"]
    assert abs(finer - est["extrapolated"]) < abs(finer - est["fine"])


# --- bare hydrogen-like level vs the logarithmic asymptote -------------------------------

def _bare_ratio(B):
    g = auto_grid(1.0, B)
    g = ZGrid(g.half_length, 4 * (g.n - 1) + 1)
    t = build_table(0, B, g)
    v, _ = lowest_eigenpairs(build_hamiltonian(t.vm(0, smoothed=True), g), 1, g.h)
    return v[0] / (-0.25 * math.log(B) ** 2)


def test_bare_level_approaches_log_asymptote():
    r = [_bare_ratio(B) for B in (1e4, 1e6, 1e8, 1e10)]
    assert all(0 < x < 1 for x in r)
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(r, r[1:]))


def test_bare_level_dips_before_asymptotic_regime():
    # the approach is not monotone from B = 1e2: the ratio first falls, then climbs to 1
    assert _bare_ratio(1e2) > _bare_ratio(1e4) < _bare_ratio(1e6)
