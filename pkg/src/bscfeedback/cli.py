"""Command-line front end.

Exit codes: 0 when every checked assertion holds, 1 when one fails,
2 for invalid arguments.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import subprocess
import sys
from dataclasses import asdict
from pathlib import Path

from . import bounds as B
from . import firstpassage as FP
from . import sim
from .channel import derive_params

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def tool_version() -> str:
    """``git describe`` of the source tree, or the installed version."""
    here = Path(__file__).resolve().parent
    try:
        res = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
        if res.returncode == 0 and res.stdout.strip():
            return res.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import version
        return version("artifact")
    except Exception:
        return "unknown"


def _k_values(args) -> list[int]:
    if args.k is not None:
        return list(args.k)
    lo = args.k_min if args.k_min is not None else 1
    hi = args.k_max if args.k_max is not None else lo
    if hi < lo:
        raise ValueError(f"--k-max ({hi}) is below --k-min ({lo})")
    return list(range(lo, hi + 1))


def _fmt(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return "" if v is None else v


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def emit(rows: list[dict], provenance: dict, fmt: str, out: str | None, extra: dict | None = None):
    """Write ``rows`` as CSV (provenance in leading ``#`` lines) or JSON."""
    if fmt == "json":
        doc = {"schema_version": SCHEMA_VERSION, "provenance": provenance}
        if extra:
            doc.update(extra)
        doc["rows"] = [{k: _json_value(v) for k, v in r.items()} for r in rows]
        text = json.dumps(doc, indent=2) + "\n"
    else:
        buf = io.StringIO(newline="")
        for k, v in {**provenance, **(extra or {})}.items():
            buf.write(f"# {k}={v}\r\n")
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]))
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
        text = buf.getvalue()
    if out:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _provenance(args, **more) -> dict:
    prov = {"command": args.command, "tool_version": tool_version()}
    for name in ("seed", "p", "epsilon", "trials", "encoder"):
        if hasattr(args, name):
            prov[name] = getattr(args, name)
    prov.update(more)
    return prov


def _bound_columns(M, eps, params) -> dict:
    b = B.compute_bounds(M, eps, params)
    return {
        "naghshvar_thm1": b.naghshvar_thm1,
        "corollary1": b.corollary1,
        "main_thm2": b.main_thm2,
        "polyanskiy_vlf": b.polyanskiy_vlf,
    }


def _sweep_row(s: sim.AggregateStats, params) -> dict:
    row = {
        "k": int(s.k),
        "M": s.M,
        "trials": s.trials,
        "mean_tau": s.mean_tau,
        "stderr_tau": s.stderr_tau,
        "mean_tau_theta_eps": s.mean_tau_theta_eps,
        "mean_tau_theta_half": s.mean_tau_theta_half,
        "mean_tau_star": s.mean_tau_star,
        "stderr_tau_star": s.stderr_tau_star,
        "rate": s.rate,
        "pe": s.pe,
        "pe_wilson_halfwidth": s.pe_wilson_halfwidth,
        "fallback_rate": s.fallback_rate,
        "max_steps_exceeded": s.max_steps_exceeded,
        "ordering_violations": s.ordering_violations,
        "step_violations": s.step_violations,
        "sed_violations": s.sed_violations,
    }
    row.update(_bound_columns(s.M, s.epsilon, params))
    # stop-feedback rate at the simulated mean blocklength
    row["polyanskiy_rate_at_mean_tau"] = (
        B.polyanskiy_log_m(s.mean_tau, s.epsilon, params) / s.mean_tau
    )
    return row


def cmd_sweep(args) -> int:
    params = derive_params(args.p)
    ks = _k_values(args)
    stats = sim.run_sweep(ks, args.p, args.epsilon, args.trials, args.seed,
                          encoder=args.encoder, workers=args.workers,
                          max_steps_factor=args.max_steps_factor,
                          uniform_theta=args.uniform_theta)
    rows = [_sweep_row(s, params) for s in stats]
    emit(rows, _provenance(args), args.format, args.out)
    status = EXIT_OK
    for r in rows:
        if not r["mean_tau"] <= r["main_thm2"] + 3 * r["stderr_tau"]:
            print(f"violation: k={r['k']} mean tau {r['mean_tau']:.4f} exceeds "
                  f"main bound {r['main_thm2']:.4f} + 3 stderr", file=sys.stderr)
            status = EXIT_FAIL
        if (r["max_steps_exceeded"] or r["ordering_violations"] or r["step_violations"]
                or r["sed_violations"]):
            print(f"violation: k={r['k']} has guard hits or invariant violations",
                  file=sys.stderr)
            status = EXIT_FAIL
    return status


def cmd_simulate(args) -> int:
    if args.k is None and args.k_min is None:
        raise ValueError("simulate needs --k")
    if len(_k_values(args)) != 1:
        raise ValueError("simulate takes a single k; use sweep for a range")
    return cmd_sweep(args)


def cmd_bounds(args) -> int:
    params = derive_params(args.p)
    es = B.epsilon_star(args.p)
    rows = []
    for k in _k_values(args):
        M = 2 ** k
        row = {"k": k, "M": M}
        row.update(_bound_columns(M, args.epsilon, params))
        row.update({f"rate_{n}": math.log2(M) / row[n]
                    for n in ("naghshvar_thm1", "corollary1", "main_thm2", "polyanskiy_vlf")})
        rows.append(row)
    extra = {"epsilon_star": es.value, "log2_epsilon_star": es.log2_value,
             "epsilon_star_underflow": es.underflow}
    emit(rows, _provenance(args), args.format, args.out, extra)
    return EXIT_OK


def cmd_first_passage(args) -> int:
    params = derive_params(args.p)
    n = args.n if args.n is not None else B.confirmation_steps(args.epsilon, params)
    d0 = args.delta0 if args.delta0 is not None else FP.delta0_upper_bound(params)
    spec = FP.FirstPassageSpec(n, params.p, d0)
    cf = FP.solve_closed_form(spec)
    ls = FP.solve_linear_system(spec)
    rows = [{"state": i, "v_closed_form": a, "v_linear_system": b}
            for i, (a, b) in enumerate(zip(cf.v, ls.v))]
    extra = {"n": n, "delta0": d0, "delta0_star": cf.delta0_star,
             "v0_random_walk": cf.v0_random_walk, "v0_differential": cf.v0_differential}
    status = EXIT_OK
    if args.mc_trials:
        est = FP.simulate_chain(spec, args.mc_trials, args.seed)
        extra.update({"mc_mean": est.mean, "mc_stderr": est.stderr, "mc_trials": est.trials})
        if abs(est.mean - cf.v0) > 4 * est.stderr:
            status = EXIT_FAIL
    rel = max(abs(a - b) / max(abs(b), 1.0) for a, b in zip(cf.v, ls.v))
    extra["max_relative_gap"] = rel
    if rel > 1e-10:
        status = EXIT_FAIL
    emit(rows, _provenance(args, n=n, delta0=d0), args.format, args.out, extra)
    return status


def cmd_verify_lemmas(args) -> int:
    if args.encoder != "sed":
        raise ValueError("lemma verification applies to the SED encoder only")
    params = derive_params(args.p)
    ks = _k_values(args)
    if len(ks) != 1:
        raise ValueError("verify-lemmas takes a single k")
    cfg = sim.StoppingConfig.default(2 ** ks[0], args.epsilon, params, args.max_steps_factor)
    report = sim.verify_lemma1(cfg, params, args.trials, args.seed, workers=args.workers,
                               uniform_theta=bool(args.uniform_theta))
    checks = sim.evaluate_lemmas(report)
    rows = [asdict(c) for c in checks]
    extra = {"steps": report.steps, "mean_du": report.mean_du,
             "mean_du_comm": report.mean_du_comm, "mean_du_conf": report.mean_du_conf,
             "mean_excursion": report.mean_excursion, "delta0_bound": report.delta0_bound}
    emit(rows, _provenance(args, k=ks[0]), args.format, args.out, extra)
    failed = [c.name for c in checks if c.hard and not c.passed]
    soft = [c.name for c in checks if not c.hard and not c.passed]
    if soft:
        print("statistical checks outside tolerance: " + ", ".join(soft), file=sys.stderr)
    if failed:
        print("hard invariant failures: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bscfeedback",
        description="Variable-length coding over the BSC with full feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--p", type=float, default=0.05, help="crossover probability")
    common.add_argument("--epsilon", type=float, default=1e-3, help="target error probability")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help="output file (default stdout)")

    krange = argparse.ArgumentParser(add_help=False)
    krange.add_argument("--k", type=int, nargs="+", help="explicit log2 M values")
    krange.add_argument("--k-min", type=int)
    krange.add_argument("--k-max", type=int)

    mc = argparse.ArgumentParser(add_help=False)
    mc.add_argument("--trials", type=int, default=10_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--encoder", choices=sim.ENCODERS, default="sed")
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--max-steps-factor", type=float, default=100.0)
    mc.add_argument("--uniform-theta", action="store_true", default=None,
                    help="draw the true message uniformly (default for horstein)")

    p = sub.add_parser("simulate", parents=[common, krange, mc], help="one k")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("sweep", parents=[common, krange, mc], help="rate curve over k")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("bounds", parents=[common, krange], help="bound table")
    p.set_defaults(func=cmd_bounds)
    p = sub.add_parser("verify-lemmas", parents=[common, krange, mc],
                       help="increment checks on simulated trials")
    p.set_defaults(func=cmd_verify_lemmas)
    p = sub.add_parser("first-passage", parents=[common], help="chain first-passage times")
    p.add_argument("--n", type=int, help="transient states (default from epsilon)")
    p.add_argument("--delta0", type=float, help="self-loop weight (default: excursion bound)")
    p.add_argument("--mc-trials", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_first_passage)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
