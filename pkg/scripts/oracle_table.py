"""Closed-form fiber entries against brute-force quadrature of the singular-kernel form (d = 1).

    python3 scripts/oracle_table.py --M 4 --xi 0 0.3 1.0
"""
import argparse

import numpy as np

from homoglab.assembly import LatticeBasis, oracle_discrepancy
from homoglab.coefficients import ProblemSpec, fixture_a, fixture_b

FIXTURES = {"A": fixture_a, "B": fixture_b}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", choices=sorted(FIXTURES), default="A")
    ap.add_argument("--M", type=int, default=4)
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--xi", type=float, nargs="+", default=[0.0, 0.3, 1.0])
    args = ap.parse_args()

    ct = FIXTURES[args.fixture]()
    spec = ProblemSpec(1, args.alpha, args.M)
    idx = LatticeBasis(1, args.M).indices[:, 0]
    for xi in args.xi:
        res = oracle_discrepancy(ct, spec, xi)
        q, p = res["worst_q"], res["worst_p"]
        print(f"xi={xi:<5g} max rel {res['max_rel']:.2e} at (q={idx[q]}, p={idx[p]}): "
              f"closed {res['closed'][q, p].real:.10f}  oracle {res['oracle'][q, p].real:.10f}  "
              f"(quadrature error estimate {res['quadrature_error']:.1e})")
        diag = np.real(np.diag(res["closed"]))
        print("   diagonal:", " ".join(f"{v:.4f}" for v in diag))


if __name__ == "__main__":
    main()
