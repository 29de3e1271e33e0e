"""E(N) and E(Z) sweeps with their first and second differences."""

import argparse

import numpy as np

from ddmatom.potentials import cached_table
from ddmatom.scf import ScfConfig, energy_curve, scf_solve, solve_on_table


def report(label, x, e):
    d1 = np.diff(e)
    d2 = e[2:] + e[:-2] - 2 * e[1:-1]
    print(f"{label}-scan: max first difference {d1.max():.3e}, second differences in [{d2.min():.3e}, {d2.max():.3e}]")
    for xi, ei in zip(x, e):
        print(f"  {label} = {xi:8.4f}   E = {ei:.12f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--Z", type=float, default=3.0)
    ap.add_argument("--B", type=float, default=50.0)
    ap.add_argument("--N", type=float, default=3.0, help="particle number for the Z sweep")
    args = ap.parse_args()
    cfg = ScfConfig(energy_tol=1e-12, density_tol=1e-9)

    Ns = np.linspace(0.5, 2 * args.Z, 12)
    reps = energy_curve(args.Z, args.B, Ns, cfg)
    report("N", Ns, np.array([r.energy.total for r in reps]))

    Zs = np.linspace(2 * args.N / 3, 5 * args.N / 3, 9)
    grid = scf_solve(args.N, Zs[0], args.B, cfg).grid
    table = cached_table(int(np.ceil(args.N)), args.B, grid, None)
    prev, ez = None, []
    for Z in Zs:
        prev = solve_on_table(args.N, Z, table, cfg, initial=prev)
        ez.append(prev.energy.total)
    report("Z", Zs, np.array(ez))


if __name__ == "__main__":
    main()
