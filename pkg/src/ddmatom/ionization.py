"""Critical particle number and rank-one diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .potentials import PotentialTable, cached_table
from .scf import ScfConfig, SolveReport, scf_solve, solve_on_table

__all__ = [
    "NcritReport",
    "BracketError",
    "find_ncrit",
    "rank_one_check",
    "chemical_potential_identity_check",
]


class BracketError(RuntimeError):
    pass


@dataclass
class NcritReport:
    Z: float
    B: float
    n_critical: float
    lower_bound: float
    upper_bound: float
    mu_trace: list[tuple[float, float]] = field(default_factory=list)
    rank_flag: bool = True
    dE_dZ: float = 0.0
    energy: float = 0.0
    filled: float = 0.0
    report: SolveReport | None = field(default=None, repr=False)
    table: PotentialTable | None = field(default=None, repr=False)

    @property
    def bounds_hold(self) -> bool:
        return self.lower_bound <= self.n_critical <= self.upper_bound

    def summary(self) -> dict:
        return {
            "Z": self.Z, "B": self.B, "n_critical": self.n_critical,
            "lower_bound": self.lower_bound, "upper_bound": self.upper_bound,
            "bounds_hold": self.bounds_hold, "rank_flag": self.rank_flag,
            "dE_dZ": self.dE_dZ, "energy": self.energy, "filled": self.filled,
            "mu_trace": [[n, mu] for n, mu in self.mu_trace],
        }


def _ionized(rep: SolveReport, rep_plus: SolveReport, mu_floor: float, tol: float) -> bool:
    flat = abs(rep_plus.energy.total - rep.energy.total) <= tol * max(1.0, abs(rep.energy.total))
    return rep.mu >= -mu_floor and flat


def find_ncrit(Z: float, B: float, tol_N: float = 1e-3, config: ScfConfig | None = None, *,
               table: PotentialTable | None = None, cap: float = 8.0) -> NcritReport:
    """Smallest N in [Z, cap*Z] at which mu reaches 0 and E stops decreasing (bisection).

    The box is sized once for the upper end of the bracket and shared by every solve.
    """
    config = config or ScfConfig()
    if not (Z > 0 and B > 0):
        raise ValueError("Z and B must be positive")
    if not tol_N > 0:
        raise ValueError("tol_N must be positive")
    hi = cap * Z
    M = math.ceil(hi + tol_N)
    if table is None:
        grid = scf_solve(Z, Z, B, config).grid
        table = cached_table(M, B, grid, config.cache_dir)
    mu_floor = 1e-7 * Z * Z
    trace: list[tuple[float, float]] = []
    cache: dict[float, SolveReport] = {}

    def solve(N):
        if N not in cache:
            cache[N] = solve_on_table(N, Z, table, config)
            trace.append((N, cache[N].mu))
        return cache[N]

    def ionized(N):
        return _ionized(solve(N), solve(N + tol_N), mu_floor, 2 * config.energy_tol)

    if not ionized(hi):
        raise BracketError(f"mu({hi:g}) = {solve(hi).mu:.3e} still negative: no plateau below {cap:g}Z")
    # every solve above N_c shares the N_c minimizer, so the filled count brackets tightly
    lo = Z
    if ionized(lo):
        hi = lo
    else:
        guess = min(hi, solve(hi).filled)
        if guess > lo and ionized(guess):
            hi = guess
            probe = max(lo, guess - tol_N)
            if not ionized(probe):
                lo = probe
        while hi - lo > tol_N:
            mid = 0.5 * (lo + hi)
            if ionized(mid):
                hi = mid
            else:
                lo = mid
    n_c = hi
    rep = solve(n_c)
    upper = 4.0 * Z - rep.dE_dZ / n_c
    ok, _ = rank_one_check(rep)
    trace.sort()
    return NcritReport(
        Z=float(Z), B=float(B), n_critical=float(n_c), lower_bound=float(Z), upper_bound=float(upper),
        mu_trace=trace, rank_flag=ok, dE_dZ=rep.dE_dZ, energy=rep.energy.total, filled=rep.filled,
        report=rep, table=table,
    )


def rank_one_check(report: SolveReport, threshold: float = 1e-8) -> tuple[bool, float]:
    """(every channel carries at most one level with f > threshold, largest second-level occupation)."""
    worst = 0.0
    ok = True
    for ch in report.channels:
        occupied = int(np.count_nonzero(ch.occupations > threshold))
        if occupied > 1:
            ok = False
        if ch.occupations.size > 1:
            worst = max(worst, float(ch.occupations[1]))
    return ok, worst


def chemical_potential_identity_check(report: SolveReport) -> float:
    """|mu - lowest level of channel ceil(N)-1|."""
    m = max(1, math.ceil(report.N - 1e-12)) - 1
    return abs(report.mu - float(report.channels[m].values[0]))
