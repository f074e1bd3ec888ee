"""Command line entry point: ``lockbench <subcommand> ...``."""
from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from ..lock import bandit_failure_closed_form, bandit_failure_exhaustive, bandit_guess_experiment
from .checks import gradcheck, symcheck
from .config import ConfigError, load_config
from .oracle import format_report, oracle_report
from .plot import plot
from .runner import WORKERS_ENV, run_sweep, success_table, worker_count


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    workers = args.workers if args.workers is not None else worker_count()
    results = run_sweep(cfg, args.out, workers)
    for method, rows in success_table(results).items():
        cells = "  ".join(f"H={h}: {s}/{n}" for h, (s, n) in sorted(rows.items()))
        print(f"{method:<12} {cells}")
    return 0


def cmd_plot(args) -> int:
    data = plot(args.inp, args.out)
    print(f"wrote {args.out} ({len(data)} methods)")
    return 0


def cmd_oracle(args) -> int:
    if args.hmax < 3:
        print("--hmax must be >= 3", file=sys.stderr)
        return 2
    rows = oracle_report(args.hmax, mc=args.mc, seed=args.seed)
    print(format_report(rows))
    return 0 if all(r.passed for r in rows) else 1


def cmd_bandit(args) -> int:
    A, K, T = args.arms, args.pulls, args.trials
    if not 0 <= K < A or T < 1:
        print("need 0 <= pulls < arms and trials >= 1", file=sys.stderr)
        return 2
    exact = bandit_failure_closed_form(A, K)
    rate = bandit_guess_experiment(A, K, T, np.random.default_rng(args.seed))
    se = math.sqrt(float(exact) * (1 - float(exact)) / T)
    ok = abs(rate - float(exact)) <= max(4 * se, 1e-12)
    print(f"closed form 1 - (K+1)/A = {exact} = {float(exact):.6f}")
    print(f"simulated over {T} trials: {rate:.6f} (se {se:.2g})")
    if A <= 8:
        ex = bandit_failure_exhaustive(A, K)
        print(f"exhaustive enumeration: {ex}")
        ok &= ex == exact
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _report(results) -> int:
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_symcheck(args) -> int:
    return _report(symcheck(args.seed))


def cmd_gradcheck(args) -> int:
    return _report(gradcheck(args.fixtures, args.seed))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lockbench", description="Lock-family benchmark harness.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="run a configured experiment grid")
    s.add_argument("--config", required=True, help="JSON experiment config")
    s.add_argument("--out", required=True, help="results CSV (resumed if it exists)")
    s.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("plot", help="success fraction vs horizon as SVG")
    s.add_argument("--in", dest="inp", required=True, help="results CSV")
    s.add_argument("--out", required=True, help="output SVG")
    s.set_defaults(func=cmd_plot)

    s = sub.add_parser("oracle", help="exact uniform-policy reward probabilities")
    s.add_argument("--hmax", type=int, required=True)
    s.add_argument("--mc", type=int, default=0, help="Monte Carlo trajectories per horizon")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("bandit", help="probe-then-guess strategy on a deterministic bandit")
    s.add_argument("--arms", type=int, required=True)
    s.add_argument("--pulls", type=int, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bandit)

    s = sub.add_parser("symcheck", help="permutation coupling and twin-instance checks")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_symcheck)

    s = sub.add_parser("gradcheck", help="finite-difference and optimizer checks")
    s.add_argument("--fixtures", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
