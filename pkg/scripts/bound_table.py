"""Bound blocklengths and the stop-feedback crossover point eps*(p).

    python3 scripts/bound_table.py --p 0.05 0.1 0.2
"""
import argparse

from bscfeedback.bounds import compute_bounds, epsilon_star
from bscfeedback.channel import derive_params


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, nargs="+", default=[0.05])
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 5, 10, 15, 20, 25])
    args = ap.parse_args()

    for p in args.p:
        params = derive_params(p)
        es = epsilon_star(p)
        print(f"p={p}  C={params.C:.4f} C1={params.C1:.4f} C2={params.C2:.4f}  "
              f"eps*={es.value:.4e}")
        print(f"  {'k':>3} {'main':>9} {'VLF':>9} {'corollary':>10} {'naghshvar':>10}  smallest")
        for k in args.k:
            b = compute_bounds(2**k, args.epsilon, params)
            print(f"  {k:>3} {b.main_thm2:9.3f} {b.polyanskiy_vlf:9.3f} {b.corollary1:10.3f} "
                  f"{b.naghshvar_thm1:10.1f}  {b.smallest}")


if __name__ == "__main__":
    main()
