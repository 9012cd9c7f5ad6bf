"""Expected first-passage times of the confirmation chain against the self-loop weight.

Shows that V0 equals n/(1-2p) at the random-walk weight and grows linearly
above it; the Monte Carlo column checks one value per row.

    python3 scripts/first_passage_table.py --p 0.05 --n 3
"""
import argparse

import numpy as np

from bscfeedback.firstpassage import (
    FirstPassageSpec,
    delta0_star,
    simulate_chain,
    solve_closed_form,
    solve_linear_system,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.05)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--mc-trials", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    d_star = delta0_star(args.p)
    print(f"delta0* = {d_star:.4f}, n/(1-2p) = {args.n / (1 - 2 * args.p):.4f}")
    print(f"{'delta0':>8} {'closed':>10} {'linear':>10} {'MC':>10} {'+-':>7}")
    for i, d0 in enumerate(np.linspace(0.0, 4 * d_star, 9)):
        spec = FirstPassageSpec(args.n, args.p, float(d0))
        est = simulate_chain(spec, args.mc_trials, args.seed + i)
        print(f"{d0:8.3f} {solve_closed_form(spec).v0:10.4f} "
              f"{solve_linear_system(spec).v0:10.4f} {est.mean:10.4f} {est.stderr:7.4f}")


if __name__ == "__main__":
    main()
