"""
crflat command line driver.

Exit codes: 0 success, 1 computed but not CR-flat or a failed check,
2 invalid input or violated precondition, 3 I/O or format failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.geometry.config import load_config, read_sidecar, write_sidecar
from src.geometry.construct import build_germ, mtilde0
from src.geometry.invariants import HypersurfaceGerm, full_report
from src.geometry.report import write_report
from src.series.codec import dumps, read_series, write_series
from src.utils.errors import CRFlatError, OrderMismatch
from src.utils.logger import setup_logger
from src.utils.settings import DEFAULT_TOLERANCES, Tolerances, max_order
from src.xcheck.acceptance import DEFAULT_DRAWS, DEFAULT_SEED, REFERENCE_ORDER, run_selftest
from src.xcheck.numeric import cauchy_pompeiu_verdict, eval_grid, fd_residual, write_grid_csv

# Configure a fallback logger in case setup_logger fails
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    handlers=[logging.StreamHandler(sys.stderr)],
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_FLAT = 1
EXIT_INVALID = 2
EXIT_IO = 3

MIN_ORDER = 6
MIN_MODEL_ORDER = 2
DEFAULT_FD_STENCILS: Tuple[Tuple[Tuple[int, int, int, int], float], ...] = (
    ((1, 1, 0, 0), 1e-5),
    ((2, 1, 0, 0), 1e-4),
)
CP_LIMIT = 5e-3


def check_order(order: int, minimum: int = MIN_ORDER) -> int:
    cap = max_order()
    if order < minimum:
        raise OrderMismatch(f"Order {order} is below the minimum {minimum}")
    if order > cap:
        raise OrderMismatch(f"Order {order} exceeds the maximum {cap} (CRFLAT_MAX_ORDER)")
    return order


def parse_deriv(text: str) -> Tuple[int, int, int, int]:
    try:
        parts = tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Derivative must look like a,b,c,d, got {text!r}")
    if len(parts) != 4 or min(parts) < 0:
        raise argparse.ArgumentTypeError(
            f"Derivative needs four nonnegative integers, got {text!r}"
        )
    return parts


def emit(verdict: Dict[str, Any]) -> None:
    sys.stdout.write(dumps(verdict))
    sys.stdout.flush()


def tolerances_from(args: argparse.Namespace) -> Tolerances:
    return DEFAULT_TOLERANCES.with_overrides(cmp=args.tol_cmp, div=args.tol_div)


# --- subcommands -------------------------------------------------------------


def cmd_construct(args: argparse.Namespace) -> int:
    tol = tolerances_from(args)
    config = load_config(args.config)
    order = check_order(args.order if args.order is not None else config.order)
    germ, data = build_germ(config.rho, config.u_seed, order, tol)
    provenance = {"command": "construct", "config": str(args.config), "order": order}
    write_series(args.out, germ.F, {**provenance, "tolerances": tol.as_dict()})
    if args.sidecar:
        write_sidecar(args.sidecar, data, tol, provenance)
    logger.info(f"Constructed germ of order {order} with {germ.F.nnz()} terms")
    return EXIT_OK


def cmd_invariants(args: argparse.Namespace) -> int:
    tol = tolerances_from(args)
    series = read_series(getattr(args, "in"))
    check_order(series.order)
    germ = HypersurfaceGerm(series, tol)
    report = full_report(germ, tol, max_workers=args.workers)
    write_report(args.report, report, embed_series=args.embed_series)
    if report.cr_flat_candidate:
        logger.info("Germ is a CR-flat candidate")
        return EXIT_OK
    failed = [name for name, flag in report.flags.items() if not flag.value]
    logger.info(f"Germ is not CR-flat; failing flags: {', '.join(failed)}")
    return EXIT_NOT_FLAT


def cmd_mtilde0(args: argparse.Namespace) -> int:
    tol = tolerances_from(args)
    order = check_order(args.order, MIN_MODEL_ORDER)
    provenance = {"command": "mtilde0", "order": order, "tolerances": tol.as_dict()}
    write_series(args.out, mtilde0(order).F, provenance)
    return EXIT_OK


def _fd_verdict(args: argparse.Namespace) -> Dict[str, Any]:
    series = read_series(getattr(args, "in"))
    n = args.n if args.n is not None else 16
    if args.deriv:
        stencils: Sequence[Tuple[Tuple[int, ...], float]] = [
            (deriv, args.limit) for deriv in args.deriv
        ]
    else:
        stencils = DEFAULT_FD_STENCILS
    if args.csv:
        write_grid_csv(eval_grid(series, args.radius, n, args.plane), args.csv)
    results: List[Dict[str, Any]] = []
    for deriv, limit in stencils:
        residual = fd_residual(series, deriv, args.radius, n, args.plane)
        results.append(
            {
                "deriv": list(deriv),
                "residual": residual,
                "limit": limit,
                "passed": residual <= limit,
            }
        )
    return {
        "check": "fd",
        "radius": args.radius,
        "n": n,
        "plane": args.plane,
        "results": results,
        "passed": all(entry["passed"] for entry in results),
        "first_failure": next(
            (
                "fd[" + ",".join(map(str, entry["deriv"])) + "]"
                for entry in results
                if not entry["passed"]
            ),
            None,
        ),
    }


def _cauchy_pompeiu_verdict(args: argparse.Namespace) -> Dict[str, Any]:
    tol = tolerances_from(args)
    data = read_sidecar(getattr(args, "in"))
    n = args.n if args.n is not None else 64
    limit = args.limit if args.limit is not None else CP_LIMIT
    verdict: Dict[str, Any] = cauchy_pompeiu_verdict(data.r, data.u, args.radius, n, tol)
    verdict["limit"] = limit
    verdict["passed"] = verdict["max_residual"] <= limit
    verdict["first_failure"] = None if verdict["passed"] else "cauchy-pompeiu"
    return verdict


def cmd_check(args: argparse.Namespace) -> int:
    if args.kind == "fd":
        if args.limit is None:
            args.limit = DEFAULT_FD_STENCILS[-1][1]
        verdict = _fd_verdict(args)
    else:
        verdict = _cauchy_pompeiu_verdict(args)
    verdict["tolerances"] = tolerances_from(args).as_dict()
    emit(verdict)
    if verdict["passed"]:
        return EXIT_OK
    logger.error(f"Check failed: {verdict['first_failure']}")
    return EXIT_NOT_FLAT


def cmd_selftest(args: argparse.Namespace) -> int:
    order = check_order(args.order)
    result = run_selftest(order, args.draws, args.seed, tolerances_from(args), args.workers)
    emit(result.as_dict())
    if result.passed:
        return EXIT_OK
    logger.error(f"Selftest failed; first failing check: {result.first_failure}")
    return EXIT_NOT_FLAT


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crflat",
        description="Rigid CR-flat hypersurface germs in C^3: construction, invariants, checks.",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="More logging (repeatable)."
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors.")
    parser.add_argument("--log-file", type=Path, help="Also write DEBUG logs to this file.")
    parser.add_argument("--log-config", type=Path, help="Configure logging from an ini file.")
    parser.add_argument("--tol-cmp", type=float, help="Relative comparison tolerance.")
    parser.add_argument("--tol-div", type=float, help="Smallest admissible constant term.")
    parser.add_argument("--workers", type=int, help="Upper bound on worker threads.")
    sub = parser.add_subparsers(dest="command", required=True)

    construct = sub.add_parser("construct", help="Build a CR-flat germ from a config.")
    construct.add_argument("--config", type=Path, required=True, help="crflat-config-v1 file.")
    construct.add_argument("--out", type=Path, required=True, help="Output series file for F.")
    construct.add_argument("--sidecar", type=Path, help="Output file for r, t, u, Re v.")
    construct.add_argument("--order", type=int, help="Override the config order.")
    construct.set_defaults(handler=cmd_construct)

    invariants = sub.add_parser("invariants", help="Compute the invariant report of a germ.")
    invariants.add_argument("--in", type=Path, required=True, help="crflat-series-v1 file for F.")
    invariants.add_argument("--report", type=Path, required=True, help="Output report file.")
    invariants.add_argument(
        "--embed-series", action="store_true", help="Embed residual series in the report."
    )
    invariants.set_defaults(handler=cmd_invariants)

    model = sub.add_parser("mtilde0", help="Write the model germ.")
    model.add_argument("--order", type=int, required=True)
    model.add_argument("--out", type=Path, required=True)
    model.set_defaults(handler=cmd_mtilde0)

    check = sub.add_parser("check", help="Run a numerical cross-check.")
    check.add_argument("--kind", choices=("fd", "cauchy-pompeiu"), required=True)
    check.add_argument(
        "--in", type=Path, required=True, help="Series file (fd) or sidecar (cauchy-pompeiu)."
    )
    check.add_argument("--radius", type=float, default=0.3)
    check.add_argument("--n", type=int, help="Grid resolution (default 16 for fd, 64 otherwise).")
    check.add_argument(
        "--deriv", type=parse_deriv, action="append", help="Stencil a,b,c,d (repeatable)."
    )
    check.add_argument("--limit", type=float, help="Residual limit for the check.")
    check.add_argument("--plane", choices=("z1", "z2"), default="z2")
    check.add_argument("--csv", type=Path, help="Also dump the input on the grid as CSV (fd).")
    check.set_defaults(handler=cmd_check)

    selftest = sub.add_parser("selftest", help="Run the acceptance suite.")
    selftest.add_argument("--order", type=int, default=REFERENCE_ORDER)
    selftest.add_argument("--draws", type=int, default=DEFAULT_DRAWS)
    selftest.add_argument("--seed", type=int, default=DEFAULT_SEED)
    selftest.set_defaults(handler=cmd_selftest)
    return parser


def log_level(args: argparse.Namespace) -> int:
    if args.quiet:
        return logging.WARNING
    return logging.DEBUG if args.verbose else logging.INFO


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        setup_logger(log_level(args), args.log_file, args.log_config)
    except Exception as e:
        # Use the fallback logger if setup_logger fails
        logger.error(f"Failed to initialize custom logger: {e}. Using fallback.")

    logger.debug(f"Running {args.command} with {vars(args)}")
    try:
        return args.handler(args)
    except CRFlatError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: I/O error: {e}")
        return EXIT_IO
    except Exception as e:
        logger.exception(f"{args.command} failed unexpectedly: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
