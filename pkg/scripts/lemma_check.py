"""Empirical drift of the true-message log-likelihood ratio under SED coding.

Prints per-regime increment means with trial-clustered standard errors and
the outcome of each check.

    python3 scripts/lemma_check.py --k 10 --trials 700000
"""
import argparse

from bscfeedback.channel import derive_params
from bscfeedback.sim import StoppingConfig, evaluate_lemmas, verify_lemma1


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--p", type=float, default=0.05)
    ap.add_argument("--epsilon", type=float, default=1e-3)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()

    params = derive_params(args.p)
    cfg = StoppingConfig.default(2**args.k, args.epsilon, params)
    r = verify_lemma1(cfg, params, args.trials, args.seed)
    print(f"C={r.C:.4f} C1={r.C1:.4f} C2={r.C2:.4f} steps={r.steps}")
    print(f"communication: {r.comm_steps} steps, mean {r.mean_du_comm:.4f} +- {r.stderr_du_comm:.4f}")
    print(f"confirmation:  {r.conf_steps} steps, mean {r.mean_du_conf:.4f} +- {r.stderr_du_conf:.4f}, "
          f"up {r.conf_plus} down {r.conf_minus} other {r.conf_other}")
    print(f"all steps:     mean {r.mean_du:.4f} +- {r.stderr_du:.4f}, max |dU|/C2 {r.max_abs_du_ratio:.6f}")
    print(f"fallback excursions: {r.excursions}, mean length {r.mean_excursion:.3f} "
          f"(bound {r.delta0_bound:.3f})")
    for c in evaluate_lemmas(r):
        kind = "hard" if c.hard else "stat"
        print(f"  [{kind}] {c.name:42s} {'ok' if c.passed else 'FAIL'}  "
              f"measured {c.measured:.6g} vs {c.threshold:.6g}")


if __name__ == "__main__":
    main()
