"""Mean stopping time of SED coding against the Horstein posterior-matching scheme.

    python3 scripts/encoder_comparison.py --k 2 4 6 8 10 --trials 20000
"""
import argparse

from bscfeedback.sim import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.05)
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 4, 6, 8, 10])
    ap.add_argument("--trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    sed = run_sweep(args.k, args.p, args.epsilon, args.trials, args.seed, uniform_theta=True)
    hor = run_sweep(args.k, args.p, args.epsilon, args.trials, args.seed, encoder="horstein")
    print(f"{'k':>3} {'SED tau':>10} {'Horstein tau':>13} {'SED Pe':>9} {'Horstein Pe':>12}")
    for a, b in zip(sed, hor):
        print(f"{a.k:>3g} {a.mean_tau:10.3f} {b.mean_tau:13.3f} {a.pe:9.2e} {b.pe:12.2e}")


if __name__ == "__main__":
    main()
