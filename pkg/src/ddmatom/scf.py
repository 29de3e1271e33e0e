"""Self-consistent minimization of the DDM functional.

The iteration is the optimal damping algorithm: from the current density the channel
Hamiltonians h_m = -d^2/dz^2 - Phi_m are diagonalized, the Aufbau state of the linearized
functional is formed, and the new iterate is the exact minimizer of the energy on the segment
between the two (the energy is a quadratic polynomial in the step). The linearized energy
difference is a duality gap: E(current) - E_min <= -gap, which is the stopping criterion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ZGrid, build_hamiltonian, dirichlet_form, lowest_eigenpairs, richardson, Eigenpair
from .meanfield import Convolver, EnergyBreakdown, DensityProfile
from .potentials import PotentialTable, SizingError, cached_table

__all__ = [
    "ChannelState",
    "ScfConfig",
    "SolveReport",
    "GridSizingError",
    "aufbau_fill",
    "auto_grid",
    "scf_solve",
    "solve_on_table",
    "chemical_potential",
    "energy_curve",
    "richardson_estimate",
    "level_sums",
    "ordering_margins",
    "aufbau_form_ok",
    "negative_level_count",
]

log = logging.getLogger(__name__)


class GridSizingError(RuntimeError):
    pass


@dataclass
class ScfConfig:
    energy_tol: float = 1e-9      # relative, on the duality gap
    density_tol: float = 1e-7     # L1 norm of the last density update
    max_iter: int = 500
    eigen_count: int | None = None  # default min(ceil(N) + 2, 12)
    half_length: float | None = None
    n_points: int | None = None
    max_doublings: int = 6
    wall_tol: float = 1e-10
    cache_dir: str | None = None
    history: int = 8              # earlier Aufbau candidates kept for the hull minimization

    def __post_init__(self):
        if not (self.energy_tol > 0 and self.density_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.history < 0:
            raise ValueError("history must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if (self.half_length is None) != (self.n_points is None):
            raise ValueError("an explicit grid needs both half_length and n_points")

    def explicit_grid(self) -> ZGrid | None:
        if self.half_length is None:
            return None
        return ZGrid(float(self.half_length), int(self.n_points))


@dataclass
class ChannelState:
    m: int
    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    occupations: np.ndarray
    density: np.ndarray = field(repr=False)

    @property
    def eigenpairs(self) -> list[Eigenpair]:
        return [Eigenpair(float(v), self.vectors[:, i]) for i, v in enumerate(self.values)]

    @property
    def trace(self) -> float:
        return float(np.sum(self.occupations))


@dataclass
class SolveReport:
    N: float
    Z: float
    B: float
    grid: ZGrid
    energy: EnergyBreakdown
    mu: float
    channels: list[ChannelState]
    iterations: int
    converged: bool
    gap: float
    density_residual: float
    dE_dZ: float
    filled: float
    aufbau_energy: float
    history: list[dict] = field(default_factory=list, repr=False)
    rho: np.ndarray | None = field(default=None, repr=False)
    kinetic_iterate: float = 0.0

    @property
    def occupations(self) -> dict[int, np.ndarray]:
        return {ch.m: ch.occupations for ch in self.channels}

    @property
    def spectra(self) -> dict[int, np.ndarray]:
        return {ch.m: ch.values for ch in self.channels}

    @property
    def densities(self) -> DensityProfile:
        return DensityProfile(np.array([ch.density for ch in self.channels]), self.grid)

    @property
    def occupied_channels(self) -> int:
        return max(1, math.ceil(self.N - 1e-12))

    def summary(self) -> dict:
        occ = {str(ch.m): [float(f) for f in ch.occupations if f > 0] for ch in self.channels}
        levels = {str(ch.m): [float(v) for v in ch.values] for ch in self.channels}
        return {
            "N": self.N,
            "Z": self.Z,
            "B": self.B,
            "grid": {"half_length": self.grid.half_length, "n": self.grid.n, "h": self.grid.h},
            "energy": self.energy.as_dict(),
            "mu": self.mu,
            "dE_dZ": self.dE_dZ,
            "filled": self.filled,
            "converged": self.converged,
            "iterations": self.iterations,
            "gap": self.gap,
            "density_residual": self.density_residual,
            "aufbau_energy": self.aufbau_energy,
            "occupations": occ,
            "levels": levels,
        }


def aufbau_fill(spectra: dict[int, np.ndarray], N: float) -> dict[int, np.ndarray]:
    """Fill negative levels in ascending order (ties: lower m, then lower i) with budget N."""
    occ = {m: np.zeros(len(v)) for m, v in spectra.items()}
    if N <= 0:
        return occ
    levels = []
    for m, vals in spectra.items():
        vals = np.asarray(vals, dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite eigenvalue in channel {m}")
        for i, mu in enumerate(vals):
            if mu < 0:
                levels.append((float(mu), m, i))
    levels.sort()
    budget = float(N)
    for _, m, i in levels:
        if budget <= 0:
            break
        take = min(1.0, budget)
        occ[m][i] = take
        budget -= take
    return occ


def auto_grid(Z: float, B: float, n: int = 1025) -> ZGrid:
    """Initial box covering both the Coulomb-logarithmic and the weak-field length scales."""
    from .hyperstrong import L_of_eta

    eta = B / Z**3
    half = max(20.0 / (Z * max(1.0, L_of_eta(eta))), 10.0 * Z ** (-0.4) * B ** (-0.2))
    return ZGrid(half, n)


def _embed(rho: np.ndarray, old: ZGrid, new: ZGrid) -> np.ndarray:
    """Place densities from `old` into the larger box `new` with the same spacing."""
    if not math.isclose(old.h, new.h, rel_tol=1e-12) or new.n < old.n:
        raise ValueError("can only embed into a larger box with the same spacing")
    out = np.zeros((rho.shape[0], new.n))
    off = new.center - old.center
    out[:, off : off + old.n] = rho
    return out


@dataclass
class _State:
    rho: np.ndarray       # (channels + 1, n); the last row is the empty diagnostic channel
    kinetic: float


def _state_from_report(report: SolveReport, M: int, grid: ZGrid, N: float) -> _State:
    rho = np.zeros((M + 1, grid.n))
    kinetic = 0.0
    src = report.grid
    for ch in report.channels[:M]:
        occ = ch.occupations
        vecs = ch.vectors[:, : occ.size]
        kinetic += float(np.dot(occ, dirichlet_form(vecs, src.h)))
        dens = ch.density[None, :]
        if src != grid:
            dens = _embed(dens, src, grid)
        rho[ch.m] = dens[0]
    trace = grid.integrate(rho).sum()
    if trace > N:
        # Gamma -> (N / trace) Gamma keeps the state feasible for a smaller budget
        scale = N / trace
        rho *= scale
        kinetic *= scale
    return _State(rho, kinetic)


def _eigen_channel(phi: np.ndarray, grid: ZGrid, k: int):
    op = build_hamiltonian(phi, grid)
    return lowest_eigenpairs(op, min(k, grid.n), grid.h)


def _spectra(phi: np.ndarray, grid: ZGrid, counts: list[int]):
    out = []
    for m, k in enumerate(counts):
        out.append(_eigen_channel(phi[m], grid, k))
    return out


def _fill_with_expansion(phi, grid, counts, M, N):
    """Aufbau over channels 0..M-1, computing more levels where the highest one gets occupied."""
    eig = _spectra(phi[:M], grid, counts[:M])
    while True:
        occ = aufbau_fill({m: eig[m][0] for m in range(M)}, N)
        grow = [m for m in range(M) if occ[m][-1] > 0 and counts[m] < grid.n]
        if not grow:
            return eig, occ
        for m in grow:
            counts[m] = min(2 * counts[m], grid.n)
            eig[m] = _eigen_channel(phi[m], grid, counts[m])


def _neighbor_fill(spectra: dict[int, np.ndarray], occ: dict[int, np.ndarray], N: float):
    """The Aufbau filling with the boundary moved one level up, or None.

    At a plateau or near a degenerate Fermi level the linearized energy hardly distinguishes
    the two, and having both in the hull lets the minimization pick the right mixture.
    """
    levels = sorted((float(v), m, i) for m, vals in spectra.items() for i, v in enumerate(vals))
    pos = next((k for k, (_, m, i) in enumerate(levels) if occ[m][i] < 1.0), None)
    if pos is None:
        return None
    out = {m: f.copy() for m, f in occ.items()}
    _, m, i = levels[pos]
    part = occ[m][i]
    if part > 0:
        if pos + 1 >= len(levels):
            return None
        _, m2, i2 = levels[pos + 1]
        out[m][i] = 0.0
        out[m2][i2] = part
        return out
    leftover = N - sum(float(np.sum(f)) for f in occ.values())
    if leftover > 1e-14 * max(1.0, N):
        out[m][i] = min(1.0, leftover)
    elif pos > 0:
        _, m0, i0 = levels[pos - 1]
        out[m0][i0] = 0.0
        out[m][i] = 1.0
    else:
        return None
    return out


def _qp_value(lin, quad, w):
    return float(lin @ w + 0.5 * w @ quad @ w)


def _pairwise_fw(lin, quad, w, max_steps=2000):
    """Pairwise Frank-Wolfe with exact steps on the probability simplex."""
    w = w.copy()
    tol = 1e-15 * max(1.0, float(np.max(np.abs(lin))), float(np.max(np.abs(quad))))
    for _ in range(max_steps):
        g = lin + quad @ w
        t = int(np.argmin(g))
        support = np.flatnonzero(w > 0)
        a = int(support[np.argmax(g[support])])
        drop = g[a] - g[t]
        if drop <= tol:
            break
        curv = quad[t, t] + quad[a, a] - 2.0 * quad[t, a]
        step = w[a] if curv <= 0 else min(w[a], drop / curv)
        w[t] += step
        if step >= w[a]:
            w[a] = 0.0
        else:
            w[a] -= step
    return w


def _simplex_qp(lin: np.ndarray, quad: np.ndarray, w: np.ndarray, max_rounds: int = 100) -> np.ndarray:
    """min lin.w + w.quad.w/2 over the probability simplex (quad positive semidefinite).

    Primal active-set iterations on the support, started from a few Frank-Wolfe steps; the
    equality-constrained subproblems are solved in the least-squares sense so that nearly
    collinear vertices do not break it. The result is never worse than the starting point.
    """
    k = lin.size
    w = _pairwise_fw(lin, quad, w)
    best, best_val = w.copy(), _qp_value(lin, quad, w)
    scale = max(1.0, float(np.max(np.abs(lin))), float(np.max(np.abs(quad))))
    active = w > 0
    for _ in range(max_rounds):
        idx = np.flatnonzero(active)
        s = idx.size
        kkt = np.zeros((s + 1, s + 1))
        kkt[:s, :s] = quad[np.ix_(idx, idx)]
        kkt[:s, s] = 1.0
        kkt[s, :s] = 1.0
        rhs = np.concatenate([-lin[idx], [1.0]])
        sol = np.linalg.lstsq(kkt, rhs, rcond=1e-14)[0]
        target = np.zeros(k)
        target[idx] = sol[:s]
        if np.any(target[idx] < 0):
            # walk toward the subproblem solution until a weight hits zero
            d = target - w
            neg = idx[d[idx] < 0]
            steps = -w[neg] / d[neg]
            j = int(np.argmin(steps))
            t = min(1.0, float(steps[j]))
            w = w + t * d
            w[neg[j]] = 0.0
            w = np.maximum(w, 0.0)
            w /= w.sum()
            active = w > 0
            continue
        w = target
        g = lin + quad @ w
        nu = float(np.dot(w, g))
        viol = g - nu
        viol[active] = 0.0
        j = int(np.argmin(viol))
        if viol[j] >= -1e-14 * scale:
            break
        active[j] = True
    val = _qp_value(lin, quad, w)
    if np.all(w >= 0) and abs(w.sum() - 1.0) < 1e-12 and val <= best_val:
        return w
    return best


def _assemble(eig, occ, h):
    """(density rows, kinetic energy, sum f*mu) of an occupation pattern."""
    n = eig[0][1].shape[0]
    rho = np.zeros((len(eig) + 1, n))
    kin = 0.0
    elin = 0.0
    for m, f in occ.items():
        sel = np.flatnonzero(f > 0)
        if sel.size == 0:
            continue
        vals, vecs = eig[m]
        rho[m] = (vecs[:, sel] ** 2) @ f[sel]
        kin += float(np.dot(f[sel], dirichlet_form(vecs[:, sel], h)))
        elin += float(np.dot(f[sel], vals[sel]))
    return rho, kin, elin


def solve_on_table(
    N: float,
    Z: float,
    table: PotentialTable,
    config: ScfConfig | None = None,
    *,
    initial: SolveReport | None = None,
) -> SolveReport:
    """Minimize on the fixed grid of `table`; channels 0..ceil(N)-1 plus one diagnostic channel."""
    config = config or ScfConfig()
    if not (N > 0 and Z > 0):
        raise ValueError(f"N and Z must be positive, got N={N}, Z={Z}")
    grid = table.grid
    h = grid.h
    M = max(1, math.ceil(N - 1e-12))
    if table.max_m < M:
        raise SizingError(f"need potentials for m <= {M}, table has max_m={table.max_m}")
    conv = Convolver(table, M + 1)
    va = table.vm_all(M + 1, smoothed=True)
    k0 = config.eigen_count or min(M + 2, 12)
    counts = [k0] * (M + 1)

    if initial is not None:
        state = _state_from_report(initial, M, grid, N)
    else:
        state = _State(np.zeros((M + 1, grid.n)), 0.0)

    history: list[dict] = []
    vertices: list[tuple] = []
    converged = False
    gap = math.inf
    residual = math.inf
    it = 0
    energy = None
    for it in range(1, config.max_iter + 1):
        rho = state.rho
        W = conv(rho)
        attraction = -Z * h * float(np.sum(va * rho))
        direct = 0.5 * h * float(np.sum(rho * W))
        energy = EnergyBreakdown.from_parts(state.kinetic, attraction, direct)
        phi = Z * va - W

        eig, occ = _fill_with_expansion(phi, grid, counts, M, N)
        cand, cand_kin, elin_cand = _assemble(eig, occ, h)
        extra = _neighbor_fill({m: eig[m][0] for m in range(M)}, occ, N)
        elin_cur = state.kinetic - h * float(np.sum(phi * rho))
        slope = elin_cand - elin_cur
        gap = max(0.0, -slope)

        cand_w = conv(cand)
        # exact minimization over the hull of the iterate and the recent candidates; with an
        # empty history this is the optimal damping line search on the segment iterate-candidate
        pts = [(rho, W, state.kinetic)] + vertices + [(cand, cand_w, cand_kin)]
        if extra is not None:
            alt, alt_kin, _ = _assemble(eig, extra, h)
            pts.append((alt, conv(alt), alt_kin))
        dens = np.array([p[0] for p in pts])
        pots = np.array([p[1] for p in pts])
        kins = np.array([p[2] for p in pts])
        lin = kins - Z * h * np.einsum("kmj,mj->k", dens, va)
        quad = h * np.einsum("kmj,lmj->kl", dens, pots)
        quad = 0.5 * (quad + quad.T)
        weights = np.zeros(len(pts))
        weights[0] = 1.0
        if slope < 0.0:
            weights = _simplex_qp(lin, quad, weights)
        new_rho = np.tensordot(weights, dens, axes=1)
        residual = h * float(np.sum(np.abs(new_rho - rho)))
        state = _State(new_rho, float(np.dot(weights, kins)))
        alpha = 1.0 - float(weights[0])
        predicted = float(np.dot(lin, weights) + 0.5 * weights @ quad @ weights)
        if config.history > 0:
            vertices.append((cand, cand_w, cand_kin))
            del vertices[: -config.history]
        history.append(
            {"iteration": it, "energy": energy.total, "gap": gap, "alpha": alpha,
             "residual": residual, "predicted": predicted}
        )
        scale = max(abs(energy.total), abs(predicted), 1e-300)
        if gap <= config.energy_tol * scale and residual <= config.density_tol:
            converged = True
            break

    # final potentials and the Aufbau reconstruction of the converged iterate
    rho = state.rho
    W = conv(rho)
    attraction = -Z * h * float(np.sum(va * rho))
    direct = 0.5 * h * float(np.sum(rho * W))
    energy = EnergyBreakdown.from_parts(state.kinetic, attraction, direct)
    phi = Z * va - W
    traces = grid.integrate(rho)
    # traces within `snap` of an integer are integers; scaled down for tiny budgets
    snap = max(1e-9, 10.0 * config.density_tol) * min(1.0, N)
    channels = []
    eig_all = _spectra(phi, grid, counts)
    for m in range(M + 1):
        t = float(traces[m]) if m < M else 0.0
        nfull = int(math.floor(t + snap))
        frac = t - nfull
        if frac < snap:
            frac = 0.0
        need = nfull + (1 if frac > 0 else 0)
        if need > counts[m]:
            counts[m] = min(max(need, 2 * counts[m]), grid.n)
            eig_all[m] = _eigen_channel(phi[m], grid, counts[m])
        vals, vecs = eig_all[m]
        f = np.zeros(vals.size)
        f[:nfull] = 1.0
        if frac > 0:
            f[nfull] = frac
        dens = (vecs**2) @ f
        channels.append(ChannelState(m, vals, vecs, f, dens))

    rho_rec = np.array([ch.density for ch in channels])
    kin_rec = sum(float(np.dot(ch.occupations, dirichlet_form(ch.vectors, h))) for ch in channels)
    w_rec = conv(rho_rec)
    e_rec = kin_rec - Z * h * float(np.sum(va * rho_rec)) + 0.5 * h * float(np.sum(rho_rec * w_rec))

    filled_total = float(sum(ch.trace for ch in channels))
    final_fill = aufbau_fill({m: eig_all[m][0] for m in range(M)}, N)
    wall_hit = sum(float(np.sum(f)) for f in final_fill.values()) < N * (1.0 - 1e-12)
    report = SolveReport(
        N=float(N), Z=float(Z), B=table.B, grid=grid, energy=energy, mu=0.0, channels=channels,
        iterations=it, converged=converged, gap=gap, density_residual=residual,
        dE_dZ=-h * float(np.sum(va * rho)), filled=filled_total, aufbau_energy=e_rec,
        history=history, rho=rho, kinetic_iterate=state.kinetic,
    )
    report.mu = 0.0 if wall_hit else chemical_potential(report)
    if not converged:
        log.warning("SCF not converged after %d iterations (gap %.3e, residual %.3e)", it, gap, residual)
    return report


def chemical_potential(report: SolveReport) -> float:
    """Highest occupied level; 0 on the ionization plateau."""
    top = -math.inf
    for ch in report.channels:
        occ = np.flatnonzero(ch.occupations > 0)
        if occ.size:
            top = max(top, float(ch.values[occ[-1]]))
    if not math.isfinite(top) or report.filled < report.N * (1.0 - 1e-9):
        return 0.0
    return min(top, 0.0)


def _wall_density(report: SolveReport) -> float:
    rho = report.rho
    return float(np.max(np.abs(rho[:, [0, -1]])))


def scf_solve(N: float, Z: float, B: float, config: ScfConfig | None = None, *,
              table: PotentialTable | None = None, initial: SolveReport | None = None) -> SolveReport:
    """Solve with an explicit table/grid, or size the box automatically (doubling L and n)."""
    config = config or ScfConfig()
    for name, val in (("N", N), ("Z", Z), ("B", B)):
        if not (np.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be positive, got {val}")
    M = max(1, math.ceil(N - 1e-12))
    if table is not None:
        return solve_on_table(N, Z, table, config, initial=initial)
    explicit = config.explicit_grid()
    if explicit is not None:
        return solve_on_table(N, Z, cached_table(M, B, explicit, config.cache_dir), config, initial=initial)

    grid = auto_grid(Z, B)
    prev = None
    for _ in range(config.max_doublings + 1):
        table = cached_table(M, B, grid, config.cache_dir)
        report = solve_on_table(N, Z, table, config, initial=prev if prev is not None else initial)
        stable = prev is None or abs(report.energy.total - prev.energy.total) <= config.energy_tol * abs(report.energy.total)
        if _wall_density(report) < config.wall_tol and stable:
            return report
        prev = report
        grid = grid.doubled()
    raise GridSizingError(
        f"density at the wall {_wall_density(prev):.3e} > {config.wall_tol:.0e} after "
        f"{config.max_doublings} doublings (L={prev.grid.half_length}, n={prev.grid.n})"
    )


def sized_table(Z: float, B: float, N_max: float, config: ScfConfig | None = None) -> PotentialTable:
    """A table whose box passes the wall test for the largest particle number of a sweep."""
    config = config or ScfConfig()
    M = max(1, math.ceil(N_max - 1e-12))
    explicit = config.explicit_grid()
    if explicit is not None:
        return cached_table(M, B, explicit, config.cache_dir)
    report = scf_solve(N_max, Z, B, config)
    return cached_table(M, B, report.grid, config.cache_dir)


def energy_curve(Z: float, B: float, N_values, config: ScfConfig | None = None, *,
                 table: PotentialTable | None = None, warm: bool = True) -> list[SolveReport]:
    """Solve a sweep in N on one shared table, warm-starting each point from the previous one."""
    config = config or ScfConfig()
    N_values = [float(x) for x in N_values]
    if not N_values:
        raise ValueError("empty N sweep")
    if table is None:
        table = sized_table(Z, B, max(N_values), config)
    out, prev = [], None
    for N in N_values:
        rep = solve_on_table(N, Z, table, config, initial=prev if warm else None)
        out.append(rep)
        prev = rep
    return out


def richardson_estimate(N: float, Z: float, B: float, config: ScfConfig | None = None, *,
                        grid: ZGrid | None = None) -> dict:
    """Energies on spacing 2h and h over the same box; returns the extrapolated value and error estimate."""
    config = config or ScfConfig()
    M = max(1, math.ceil(N - 1e-12))
    fine = grid or scf_solve(N, Z, B, config).grid
    coarse = ZGrid(fine.half_length, (fine.n + 1) // 2)
    e_coarse = solve_on_table(N, Z, cached_table(M, B, coarse, config.cache_dir), config).energy.total
    e_fine = solve_on_table(N, Z, cached_table(M, B, fine, config.cache_dir), config).energy.total
    extrapolated, err = richardson(e_coarse, e_fine)
    return {"coarse": e_coarse, "fine": e_fine, "extrapolated": extrapolated, "error": err, "grid": fine}


def _clipped(values: np.ndarray, count: int) -> np.ndarray:
    """First `count` levels with nonnegative ones (continuum in the unbounded problem) set to 0."""
    out = np.zeros(count)
    v = np.minimum(np.asarray(values[:count], dtype=float), 0.0)
    out[: v.size] = v
    return out


def negative_level_count(report: SolveReport, m: int) -> int:
    return int(np.count_nonzero(report.channels[m].values < 0))


def level_sums(report: SolveReport, M: int) -> np.ndarray:
    """sum_{i<=M} mu_m^i for every available channel m."""
    return np.array([_clipped(ch.values, M).sum() for ch in report.channels])


def ordering_margins(report: SolveReport) -> list[dict]:
    """Both sides of the ordering inequality for 1 <= m <= ceil(N)-1 and every admissible M.

    lhs = sum_{i<=M} (m mu_{m-1}^i + (m+1) mu_{m+1}^i - (2m+1) mu_m^i)
    rhs = -(2 pi / B) sum_{i<=M} int rho~ |phi_m e_m^i|^2
    """
    from .potentials import orbital_overlap

    h = report.grid.h
    rho = np.array([ch.density for ch in report.channels])
    out = []
    for m in range(1, len(report.channels) - 1):
        ch = report.channels[m]
        overlap = np.array([orbital_overlap(m, n, report.B) for n in range(rho.shape[0])])
        weighted = overlap @ rho                   # sum_n O_mn rho_n(z)
        for M in range(1, negative_level_count(report, m) + 1):
            lo = _clipped(report.channels[m - 1].values, M)
            mid = _clipped(ch.values, M)
            hi = _clipped(report.channels[m + 1].values, M)
            lhs = float(np.sum(m * lo + (m + 1) * hi - (2 * m + 1) * mid))
            proj = h * float(np.sum(weighted[None, :] * ch.vectors[:, :M].T ** 2))
            rhs = -(2 * math.pi / report.B) * proj
            out.append({"m": m, "M": M, "lhs": lhs, "rhs": rhs, "margin": rhs - lhs})
    return out


def aufbau_form_ok(report: SolveReport, tol: float = 1e-12) -> bool:
    """Occupations in [0,1], weakly decreasing in i, at most one fractional level overall."""
    fractional = 0
    for ch in report.channels:
        f = ch.occupations
        if np.any(f < -tol) or np.any(f > 1 + tol) or np.any(np.diff(f) > tol):
            return False
        fractional += int(np.count_nonzero((f > tol) & (f < 1 - tol)))
        if np.any((f > tol) & (ch.values[: f.size] > 0)):
            return False
    return fractional <= 1
