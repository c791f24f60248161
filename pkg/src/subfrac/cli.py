"""Command line entry point.

    subfrac run EXPERIMENT [--config FILE] [--group G] [--s S] ... [--out DIR]
    subfrac report --ledger PATH [--out DIR]

Exit status: 0 success, 2 configuration error, 3 non-convergence,
4 invariant violation. Errors print a single line on stderr.
"""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import ConvergenceError, InvalidInputError, InvariantViolation, SingularityError

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(f"subfrac: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    from .experiments import EXPERIMENTS

    ap = _Parser(prog="subfrac", description="fractional p-sub-Laplacian experiments")
    ap.add_argument("--version", action="version", version=f"subfrac {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("experiment", choices=EXPERIMENTS)
    r.add_argument("--config", help="key = value file; flags override it")
    r.add_argument("--group", help="abelian:N or heisenberg1")
    r.add_argument("--norm", help="euclidean | koranyi | wmax")
    r.add_argument("--s", type=float)
    r.add_argument("--p", type=float)
    r.add_argument("--gamma", help="comma-separated list")
    r.add_argument("--theta", help="comma-separated list")
    r.add_argument("--n", help="grid points per axis (one value or one per axis)")
    r.add_argument("--R", dest="R", help="comma-separated radii")
    r.add_argument("--box", type=float, help="box scale")
    r.add_argument("--resolution", type=int, help="sphere quadrature resolution")
    r.add_argument("--count", type=int, help="family size / number of trials")
    r.add_argument("--seed", type=int)
    r.add_argument("--near-mode", dest="near_mode", choices=("skip", "local_correction"))
    r.add_argument("--min-resolution", dest="min_resolution", type=float)
    r.add_argument("--deterministic", action="store_const", const=True, default=None,
                   help="omit timings so that outputs are byte-identical across runs")
    r.add_argument("--out", help="output directory")
    r.add_argument("--ledger", help="append rows to this ledger instead of OUT/ledger.jsonl")

    rep = sub.add_parser("report", help="summarize a ledger")
    rep.add_argument("--ledger", required=True)
    rep.add_argument("--out", default="subfrac-report")
    return ap


def _fail(code: int, msg: str) -> int:
    print(f"subfrac: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "report":
        from .report import write_report
        try:
            write_report(args.ledger, args.out)
        except (OSError, ValueError) as exc:
            return _fail(EXIT_CONFIG, str(exc))
        return EXIT_OK

    from .experiments import ConfigError, load_config, run
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, InvalidInputError) as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    try:
        status, rows = run(cfg)
    except ConvergenceError as exc:
        return _fail(EXIT_CONVERGENCE, f"non-convergence: {exc}")
    except (InvariantViolation, SingularityError) as exc:
        return _fail(EXIT_INVARIANT, f"invariant violation: {exc}")
    except InvalidInputError as exc:
        return _fail(EXIT_CONFIG, f"config error: {exc}")
    npass = sum(1 for r in rows if r["pass"])
    print(f"{cfg.experiment}: {npass}/{len(rows)} checks passed -> {cfg.out}")
    if status == EXIT_INVARIANT:
        failed = sorted({r["check_id"] for r in rows if not r["pass"]})
        return _fail(EXIT_INVARIANT, f"invariant violation: failed {', '.join(failed)}")
    return status


if __name__ == "__main__":
    sys.exit(main())
