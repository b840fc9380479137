"""
Subcommand handlers.

Each handler takes the parsed arguments and a codec, writes artifacts to
disk, and returns a :class:`CommandOutcome` whose summary is printed as JSON.
"""

from __future__ import annotations

import argparse
import logging
from typing import Any, Callable

import numpy as np
from pydantic import BaseModel, Field

from src.application import correlation_sets, slices, tracial_models, universal3
from src.config.settings import get_settings
from src.domain import CorrelationClass, MalformedInputError, Side, SliceQuery
from src.infrastructure.artifact_io import ArtifactCodec
from src.utils.helpers import parse_float_list, round_floats

logger = logging.getLogger(__name__)


class CommandOutcome(BaseModel):
    """JSON summary plus whether every check the command ran passed."""

    ok: bool = True
    summary: dict[str, Any] = Field(default_factory=dict)


Handler = Callable[[argparse.Namespace, ArtifactCodec], CommandOutcome]


def _write(codec: ArtifactCodec, path: str | None, text: str, summary: dict[str, Any]) -> None:
    if path:
        codec.write_text(path, text)
        summary["out"] = path


# ─── Correlations ─────────────────────────────────────────────────────────────


def cmd_validate(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    tensor = codec.load_correlation(args.file)
    report = correlation_sets.validate(tensor, args.tol)
    return CommandOutcome(
        ok=report.all_pass,
        summary={"n": tensor.n, "m": tensor.m, **report.model_dump()},
    )


def cmd_map(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    if args.to_matrix:
        matrix = correlation_sets.restrict(codec.load_correlation(args.to_matrix), args.tol)
        summary = {"matrix": matrix.to_payload(), "asymmetry": matrix.asymmetry}
        _write(codec, args.out, codec.dump_matrix(matrix), summary)
    else:
        tensor = correlation_sets.expand(codec.load_matrix(args.to_tensor), args.tol)
        summary = {"correlation": tensor.to_payload()}
        _write(codec, args.out, codec.dump_correlation(tensor), summary)
    return CommandOutcome(summary=summary)


def cmd_embed(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    tensor = codec.load_correlation(args.file)
    if tensor.m != args.m:
        raise MalformedInputError(f"--m {args.m} but the file has m={tensor.m}", "outcomes")
    embedded = correlation_sets.embed_outcomes(tensor, args.tol)
    summary = {"correlation": embedded.to_payload()}
    _write(codec, args.out, codec.dump_correlation(embedded), summary)
    return CommandOutcome(summary=summary)


def cmd_project(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    tensor = codec.load_correlation(args.file)
    report = correlation_sets.project_outcomes(tensor, args.n, args.m, args.tol)
    summary: dict[str, Any] = {
        "in_f": report.in_f,
        "violated": report.violated,
        "max_violation": report.max_violation,
    }
    if report.tensor is not None:
        summary["correlation"] = report.tensor.to_payload()
        _write(codec, args.out, codec.dump_correlation(report.tensor), summary)
    return CommandOutcome(ok=report.in_f, summary=summary)


def cmd_synth(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    model = codec.load_model(args.file)
    tensor = tracial_models.synthesize(model, args.tol)
    report = correlation_sets.validate(tensor)
    summary = {"correlation": tensor.to_payload(), "synchronous": report.is_synchronous}
    _write(codec, args.out, codec.dump_correlation(tensor), summary)
    return CommandOutcome(ok=report.all_pass, summary=summary)


# ─── Slices ───────────────────────────────────────────────────────────────────


def cmd_slice(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    y = parse_float_list(args.y)
    query = SliceQuery(
        n=len(y),
        y=tuple(y),
        x=tuple(parse_float_list(args.x)),
        cls=CorrelationClass(args.cls),
        side=Side(args.side),
    )
    result = slices.compute_slice(query)
    summary: dict[str, Any] = {
        "value": result.value,
        "class": query.cls.value,
        "side": query.side.value,
        "weights": dict(zip(result.atom_labels, result.weights)),
        "achieved_w": list(result.achieved_w),
        "degenerate_path": result.degenerate_path,
        "max_residual": result.max_residual,
    }
    if args.emit_model:
        codec.write_text(args.emit_model, codec.dump_model(result.realizing_model))
        summary["model"] = args.emit_model
    _write(codec, args.out, codec.dump_results([result]), summary)
    ok = result.max_residual <= get_settings().slice_residual_tol
    return CommandOutcome(ok=ok, summary=summary)


def cmd_dpp(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    rows = []
    for t in np.linspace(0.0, 1.0, args.t_grid):
        t = float(t)
        rows.append(
            {
                "t": t,
                "f_q": slices.dpp_functional(t, CorrelationClass.Q),
                "f_loc": slices.dpp_functional(t, CorrelationClass.LOC),
            }
        )
    # stdout is a human table; the CSV keeps full precision
    summary: dict[str, Any] = {"rows": round_floats(rows, get_settings().table_digits)}
    if args.out:
        text = codec.dump_table(["t", "f_q", "f_loc"], [[r["t"], r["f_q"], r["f_loc"]] for r in rows])
        _write(codec, args.out, text, summary)
    return CommandOutcome(summary=summary)


# ─── Sampling and dominance ───────────────────────────────────────────────────


def cmd_sample(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    samples = tracial_models.sample_dq(
        args.n, args.dim, args.count, args.seed, workers=args.workers
    )
    summary: dict[str, Any] = {
        "n": args.n,
        "dim": args.dim,
        "count": len(samples),
        "seed": args.seed,
    }
    _write(codec, args.out, codec.dump_samples(samples), summary)
    return CommandOutcome(summary=summary)


def cmd_queries(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    samples = codec.load_samples(args.samples) if args.samples else None
    queries = slices.random_queries(args.count, args.seed, samples)
    summary: dict[str, Any] = {"count": len(queries), "seed": args.seed}
    _write(codec, args.out, codec.dump_queries(queries), summary)
    return CommandOutcome(summary=summary)


def cmd_dominate(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    settings = get_settings()
    samples = codec.load_samples(args.samples)
    if args.queries:
        queries = codec.load_queries(args.queries)
    else:
        queries = slices.random_queries(settings.query_count, settings.query_seed, samples)
    if not args.no_landmark:
        samples = slices.with_landmark(samples)
    report = slices.dominance_check(samples, queries, args.delta, args.tol)
    summary: dict[str, Any] = {
        "queries": len(report.entries),
        "covered": report.covered,
        "failures": [e.query_id for e in report.failures],
        "max_excess": max(
            (e.max_excess for e in report.entries if e.max_excess is not None), default=None
        ),
        "clean": report.clean,
    }
    _write(codec, args.out, codec.dump_dominance(report), summary)
    return CommandOutcome(ok=report.clean, summary=summary)


# ─── Universal algebra ────────────────────────────────────────────────────────


def cmd_verify_universal3(args: argparse.Namespace, codec: ArtifactCodec) -> CommandOutcome:
    if args.grid:
        rows = universal3.verify_grid(random_points=args.random, seed=args.seed, workers=args.workers)
        failed = [(r.a, r.b) for r in rows if not (r.passed and r.exactly_one_branch)]
        summary: dict[str, Any] = {
            "points": len(rows),
            "failed": failed,
            "max_residual": max((r.max_residual for r in rows), default=0.0),
            "double_roots": sum(r.double_root for r in rows),
            "z_sign_table": universal3.z_sign_table(rows),
        }
        if args.out:
            text = codec.dumps([r.model_dump() for r in rows])
            _write(codec, args.out, text, summary)
        return CommandOutcome(ok=not failed, summary=summary)

    if args.a is None or args.b is None:
        raise MalformedInputError("verify-universal3 needs --a and --b, or --grid", "arguments")
    rep = universal3.build_rep(args.a, args.b)
    summary = rep.to_payload()
    ok = True
    if rep.has_m2:
        report = universal3.verify_rep(rep)
        summary["z_sign"] = rep.z_sign
        summary["branch_residuals"] = list(rep.branch_residuals or ())
        summary["verification"] = report.model_dump()
        ok = report.passed
    _write(codec, args.out, codec.dump_rep(rep), summary)
    return CommandOutcome(ok=ok, summary=summary)


HANDLERS: dict[str, Handler] = {
    "validate": cmd_validate,
    "map": cmd_map,
    "embed": cmd_embed,
    "project": cmd_project,
    "synth": cmd_synth,
    "slice": cmd_slice,
    "dpp": cmd_dpp,
    "sample": cmd_sample,
    "queries": cmd_queries,
    "dominate": cmd_dominate,
    "verify-universal3": cmd_verify_universal3,
}
