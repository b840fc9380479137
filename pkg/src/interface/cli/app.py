"""
Command-line application.

Every subcommand prints one JSON summary to stdout. Exit codes: 0 when all
checks pass, 1 when a check ran and failed, 2 for malformed input or any
other library error (printed as a JSON error object naming the constraint).
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from src.config.settings import LogLevel, get_settings
from src.domain import CorrelationError, InfeasibleProgramError
from src.infrastructure.artifact_io import ArtifactCodec
from src.interface.cli.commands import HANDLERS
from src.utils.logging_config import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2


def _add_tol(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=None, help="Override the tolerance")


def create_parser() -> argparse.ArgumentParser:
    """Build the argument parser with every subcommand."""
    settings = get_settings()
    parser = argparse.ArgumentParser(
        prog="synccorr",
        description=f"{settings.app_name}: synchronous correlation sets and their slices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.app_version}")
    parser.add_argument("--log-level", choices=[lvl.value for lvl in LogLevel], default=None)
    parser.add_argument("--log-format", choices=["json", "text"], default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="Check class membership of a correlation file")
    p.add_argument("file")
    _add_tol(p)

    p = sub.add_parser("map", help="Convert between C_r(n,2) tensors and D_r(n) matrices")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--to-matrix", metavar="CORR_JSON")
    group.add_argument("--to-tensor", metavar="MATRIX_JSON")
    p.add_argument("--out")
    _add_tol(p)

    p = sub.add_parser("embed", help="Embed an (n,m) correlation into (nm,2)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("file")
    p.add_argument("--out")
    _add_tol(p)

    p = sub.add_parser("project", help="Project an (nm,2) correlation onto (n,m)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("file")
    p.add_argument("--out")
    _add_tol(p)

    p = sub.add_parser("synth", help="Synthesize the correlation of a tracial model")
    p.add_argument("file")
    p.add_argument("--out")
    _add_tol(p)

    p = sub.add_parser("slice", help="Exact support value of a y-slice")
    p.add_argument("--y", required=True, help="Comma-separated diagonal, e.g. .5,.5,.5")
    p.add_argument("--x", required=True, help="Comma-separated direction over pairs i<j")
    p.add_argument("--class", dest="cls", choices=["q", "loc"], default="q")
    p.add_argument("--side", choices=["upper", "lower"], default="upper")
    p.add_argument("--emit-model", metavar="MODEL_JSON")
    p.add_argument("--out", help="Result CSV")

    p = sub.add_parser("dpp", help="Tabulate f(t) = 2 l((t,t,t),(1,1,1)) + 3t")
    p.add_argument("--t-grid", type=int, default=11)
    p.add_argument("--out", help="CSV table")

    p = sub.add_parser("sample", help="Draw points of D_q(n) from random tracial models")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--dim", type=int, default=settings.sample_dim)
    p.add_argument("--count", type=int, default=settings.sample_count)
    p.add_argument("--seed", type=int, default=settings.sample_seed)
    p.add_argument("--workers", type=int, default=settings.sample_workers)
    p.add_argument("--out", help="Sample CSV")

    p = sub.add_parser("queries", help="Write a seeded query file")
    p.add_argument("--count", type=int, default=settings.query_count)
    p.add_argument("--seed", type=int, default=settings.query_seed)
    p.add_argument("--samples", help="Draw half of the diagonals from this sample CSV")
    p.add_argument("--out")

    p = sub.add_parser("dominate", help="Check samples against exact slice bounds")
    p.add_argument("--samples", required=True)
    p.add_argument("--queries", help="Query JSON; seeded random queries when omitted")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--no-landmark", action="store_true", help="Do not inject the M_2 point")
    p.add_argument("--out", help="Report CSV")

    p = sub.add_parser("verify-universal3", help="Build and verify the three-projection algebra")
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--grid", action="store_true")
    p.add_argument("--random", type=int, default=100, help="Seeded random points for --grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")

    return parser


def _error_payload(error: CorrelationError) -> dict[str, object]:
    payload: dict[str, object] = {
        "error": type(error).__name__,
        "constraint": error.constraint,
        "detail": str(error),
    }
    if isinstance(error, InfeasibleProgramError):
        payload["bases_checked"] = error.bases_checked
        payload["min_residual"] = error.min_residual
    return payload


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse ``argv``, run the subcommand and print its JSON summary.

    Returns:
        The process exit code.
    """
    settings = get_settings()
    args = create_parser().parse_args(argv)
    if args.log_level:
        level = LogLevel(args.log_level)
    else:
        level = LogLevel.DEBUG if settings.debug else settings.log_level
    configure_logging(
        level=level,
        log_format=args.log_format or settings.log_format,
        log_file=settings.log_file,
    )
    codec = ArtifactCodec(settings)
    logger.info(
        "Command started",
        extra={"command": args.command, "environment": settings.environment.value},
    )

    try:
        outcome = HANDLERS[args.command](args, codec)
    except CorrelationError as e:
        logger.error("Command failed", extra={"command": args.command, "constraint": e.constraint})
        sys.stdout.write(codec.dumps(_error_payload(e)))
        return EXIT_ERROR

    sys.stdout.write(codec.dumps({"command": args.command, "ok": outcome.ok, **outcome.summary}))
    return EXIT_OK if outcome.ok else EXIT_CHECK_FAILED
