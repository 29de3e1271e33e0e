"""DDM energies and densities against the hyper-strong limit along an eta sweep."""

import argparse
import math

from ddmatom.hyperstrong import hs_convergence_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, nargs="+", default=[1.0, 3.0])
    ap.add_argument("--Z", type=float, nargs="+", default=[1.0])
    ap.add_argument("--etas", type=float, nargs="+", default=[1e4, 1e6, 1e8, 1e10])
    args = ap.parse_args()

    print(f"{'lambda':>6} {'Z':>4} {'eta':>8} {'E/(Z^3 ln^2 eta)':>18} {'E_HS':>10} {'distance':>9} {'density':>9} {'L/ln':>6}")
    for lam in args.lam:
        for Z in args.Z:
            for r in hs_convergence_study(lam, Z, args.etas):
                print(f"{lam:6.2f} {Z:4.1f} {r['eta']:8.0e} {r['ratio']:18.10f} {r['hs_energy']:10.6f} "
                      f"{r['distance']:9.5f} {r['density_discrepancy']:9.5f} {r['L_eta'] / math.log(r['eta']):6.3f}")


if __name__ == "__main__":
    main()
