"""Corrector ladder: fitted rate of the N-corrector resolvent approximation for several alpha.

    python3 scripts/rate_ladder.py --fixture A --alphas 1.5 1.8 --N-max 4 --M 64 --out results/ladder
"""
import argparse
import time
from pathlib import Path

from homoglab.cell import effective_model
from homoglab.cli import write_csv
from homoglab.coefficients import ProblemSpec, fixture_a, fixture_b
from homoglab.sweep import SweepConfig, rate_experiment

FIXTURES = {"A": fixture_a, "B": fixture_b}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixture", choices=sorted(FIXTURES), default="A")
    ap.add_argument("--alphas", type=float, nargs="+", default=[1.5, 1.8])
    ap.add_argument("--N-max", type=int, default=2)
    ap.add_argument("--M", type=int, default=64)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("results/ladder"))
    args = ap.parse_args()

    ct = FIXTURES[args.fixture]()
    summary = []
    for alpha in args.alphas:
        spec = ProblemSpec(1, alpha, args.M)
        t = time.perf_counter()
        rep = rate_experiment(ct, spec, effective_model(ct, spec), SweepConfig(N_max=args.N_max), args.threads)
        dt = time.perf_counter() - t
        meta = {"fixture": args.fixture, "alpha": alpha, "M": args.M}
        write_csv(rep.rows, ["N", "eps", "E_fiber", "E_full", "argmax_xi"],
                  args.out / f"rates_{args.fixture}_alpha{alpha:g}.csv", meta)
        for n, f in rep.fits.items():
            summary.append({"alpha": alpha, "N": n, "slope": f["slope"], "predicted": f["predicted"],
                            "r2": f["r2"], "pass": f["pass"], "guaranteed": f["guaranteed"]})
            slope = "exact" if f["exact"] else f"{f['slope']:.4f}"
            print(f"alpha={alpha:<5g} N={n}  slope {slope:>8}  predicted {f['predicted']:.3f}  "
                  f"pass={f['pass']}  guaranteed={f['guaranteed']}")
        print(f"  ({rep.grid_size} quasimomenta, {dt:.1f}s)")
    write_csv(summary, ["alpha", "N", "slope", "predicted", "r2", "pass", "guaranteed"],
              args.out / f"summary_{args.fixture}.csv", {"fixture": args.fixture, "M": args.M})


if __name__ == "__main__":
    main()
