"""fbst command line: test, calibrate, consistency, invariance, qq.

Exit codes: 0 success, 2 invalid input, 3 optimizer or other numerical
failure, 4 sampler failure, 1 unexpected internal error.  Nothing is written
to stdout or to --out unless the command succeeds.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Sequence

from ._version import __version__
from .config import load_spec
from .errors import FBSTError, OptimizationError, SamplerError, ValidationError
from .report import rows_to_dicts, summary_dict, to_csv, write_atomic
from .runner import qq_table, run_calibration, run_consistency_study, run_invariance_check, run_test
from .surprise import MAPS

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_SAMPLER = 4

CALIBRATION_HEADER = ("n", "c_n", "replicates", "seed")
CONSISTENCY_HEADER = ("n", "median_ev_bar", "ks", "replicates", "hypothesis_true")
QQ_HEADER = ("t", "h", "c", "qq")
INVARIANCE_HEADER = ("map", "method", "ev_original", "ev_mapped", "delta", "tolerance", "passed")


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to exit 2."""

    def error(self, message):
        raise ValidationError(message)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write output here (atomically) instead of stdout")
    common.add_argument("--seed", type=_u64, help="override sampling.seed from the spec file")
    common.add_argument("--threads", type=_positive_int, default=1, help="worker processes for replicate studies")
    common.add_argument("--format", choices=("json", "csv"), help="output format")

    with_spec = _Parser(add_help=False, parents=[common])
    with_spec.add_argument("--spec", required=True, help="JSON test specification")

    parser = _Parser(prog="fbst", description="Full Bayesian Significance Test")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("test", parents=[with_spec], help="e-value, standardized e-value and decision")
    sub.add_parser("calibrate", parents=[with_spec], help="empirical critical levels c(n)")
    sub.add_parser("consistency", parents=[with_spec], help="median ev_bar and KS uniformity over an n grid")
    inv = sub.add_parser("invariance", parents=[with_spec], help="e-value before and after a reparameterization")
    inv.add_argument("--map", choices=sorted(MAPS), help="reparameterization (overrides invariance.map in the spec file)")
    qq = sub.add_parser("qq", parents=[common], help="table of QQ(t, h, c)")
    qq.add_argument("--t", type=int, nargs="+", required=True, help="dim of the parameter space")
    qq.add_argument("--h", type=int, nargs="+", required=True, help="dim of the hypothesis")
    qq.add_argument("--points", type=int, default=11, help="number of c grid points on [0, 1]")
    return parser


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _table(fmt: str, header, rows, meta) -> str:
    if fmt == "csv":
        return to_csv(header, rows)
    return _json(summary_dict({"version": __version__, "rows": rows_to_dicts(header, rows)}, meta))


def _render(args) -> tuple[str, str | None]:
    """Run the command; return (text, default output path from the spec file)."""
    started = time.perf_counter()
    if args.command == "qq":
        rows = qq_table(args.t, args.h, args.points)
        return _table(args.format or "csv", QQ_HEADER, rows, {}), None

    spec = load_spec(args.spec)

    def meta():
        return {"wall_clock_s": round(time.perf_counter() - started, 6)}

    if args.command == "test":
        report = run_test(spec, seed=args.seed)
        if args.format == "csv":
            return to_csv(("key", "value"), report.flat_rows()), spec.report_path
        return report.to_json(), spec.report_path
    if args.command == "calibrate":
        rows = run_calibration(spec, seed=args.seed, workers=args.threads)
        rows = [(r.n, r.c_n, r.replicates, r.seed) for r in rows]
        return _table(args.format or "csv", CALIBRATION_HEADER, rows, meta()), None
    if args.command == "consistency":
        rows = run_consistency_study(spec, seed=args.seed, workers=args.threads)
        rows = [(r.n, r.median_ev_bar, r.ks, r.replicates, r.hypothesis_true) for r in rows]
        return _table(args.format or "csv", CONSISTENCY_HEADER, rows, meta()), None
    inv = run_invariance_check(spec, args.map, seed=args.seed)
    if args.format == "csv":
        row = (inv.map, inv.method, inv.original.ev, inv.mapped.ev, inv.delta, inv.tolerance, inv.passed)
        return to_csv(INVARIANCE_HEADER, [row]), None
    return _json(summary_dict(inv.result(), meta())), None


def _fail(code: int, message: str) -> int:
    print(f"fbst: error: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        text, default_out = _render(args)
        out = args.out or default_out
        if out:
            write_atomic(out, text)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()
        return EXIT_OK
    except ValidationError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except SamplerError as exc:
        return _fail(EXIT_SAMPLER, f"sampler failure: {exc}")
    except OptimizationError as exc:
        return _fail(EXIT_NUMERICAL, f"optimizer failure: {exc}")
    except (FBSTError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERICAL, f"numerical failure: {exc}")
    except OSError as exc:
        return _fail(EXIT_VALIDATION, f"cannot write output: {exc}")
    except KeyboardInterrupt:
        return _fail(EXIT_INTERNAL, "interrupted")
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        if os.environ.get("FBST_DEBUG"):
            raise
        return _fail(EXIT_INTERNAL, f"internal error: {type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
