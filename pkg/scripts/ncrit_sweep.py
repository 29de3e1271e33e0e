"""Critical particle number and its ionization bounds over a few (Z, B) pairs."""

import argparse
import time

from ddmatom.ionization import find_ncrit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cases", nargs="+", default=["1:10", "2:100", "3:1e4"], help="Z:B pairs")
    ap.add_argument("--tol", type=float, default=1e-3)
    args = ap.parse_args()

    print(f"{'Z':>4} {'B':>8} {'N_c':>9} {'upper':>9} {'N_c/Z':>7} {'rank-1':>6} {'seconds':>8}")
    for case in args.cases:
        Z, B = (float(x) for x in case.split(":"))
        t0 = time.time()
        r = find_ncrit(Z, B, args.tol)
        print(f"{Z:4.1f} {B:8.0e} {r.n_critical:9.4f} {r.upper_bound:9.3f} {r.n_critical / Z:7.3f} "
              f"{str(r.rank_flag):>6} {time.time() - t0:8.1f}")


if __name__ == "__main__":
    main()
