"""
Artifact codecs: correlation, matrix, model, query and rep-dump JSON files,
sample CSV files, and result/report CSV tables.

Machine output rounds floats to ``float_digits`` significant digits so that
a fixed input always produces byte-identical files. CSV uses a comma
delimiter, a header row and LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from pydantic import ValidationError

from src.config.settings import Settings, get_settings
from src.domain import (
    BlockAlgebra,
    BlockOperator,
    CorrelationClass,
    CorrelationMatrix,
    CorrelationTensor,
    DominanceReport,
    MalformedInputError,
    SampleSet,
    Side,
    SliceQuery,
    SliceResult,
    TracialModel,
    TracialState,
    Universal3Rep,
    pair_count,
)
from src.utils.helpers import format_float, pair_labels, round_floats

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class ArtifactCodec:
    """
    Reads and writes every file format of the toolkit.

    Parse failures of any kind surface as :class:`MalformedInputError`
    naming the file.
    """

    def __init__(self, settings: Optional[Settings] = None) -> None:
        self._settings = settings or get_settings()

    # ── Generic JSON ─────────────────────────────────────────────────

    def dumps(self, payload: Any) -> str:
        """Deterministic JSON text with rounded floats and a trailing newline."""
        return json.dumps(round_floats(payload, self._settings.float_digits), indent=2) + "\n"

    def read_json(self, path: PathLike) -> Any:
        try:
            with open(path, encoding="utf-8") as f:
                return json.load(f)
        except FileNotFoundError as e:
            raise MalformedInputError(f"file not found: {path}", "file") from e
        except json.JSONDecodeError as e:
            raise MalformedInputError(f"{path} is not valid JSON: {e}", "json") from e

    def write_text(self, path: PathLike, text: str) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info("Artifact written", extra={"path": str(target), "bytes": len(text)})
        return target

    def _build(self, path: PathLike, kind: str, build: Any, data: Any) -> Any:
        try:
            return build(data)
        except ValidationError as e:
            raise MalformedInputError(f"{path}: invalid {kind}: {e}", f"{kind}-format")
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise MalformedInputError(f"{path}: invalid {kind}: {e!r}", f"{kind}-format")

    # ── Correlations and matrices ────────────────────────────────────

    def load_correlation(self, path: PathLike) -> CorrelationTensor:
        """``{"n": N, "m": M, "p": [x][y][i][j]}``."""
        data = self.read_json(path)
        return self._build(
            path,
            "correlation",
            lambda d: CorrelationTensor(n=d["n"], m=d["m"], p=d["p"]),
            data,
        )

    def load_matrix(self, path: PathLike) -> CorrelationMatrix:
        """``{"n": N, "w": [x][y]}``."""
        data = self.read_json(path)
        return self._build(path, "matrix", lambda d: CorrelationMatrix(n=d["n"], w=d["w"]), data)

    def dump_correlation(self, tensor: CorrelationTensor) -> str:
        return self.dumps(tensor.to_payload())

    def dump_matrix(self, matrix: CorrelationMatrix) -> str:
        return self.dumps(matrix.to_payload())

    # ── Tracial models ───────────────────────────────────────────────

    @staticmethod
    def _encode_block(block: np.ndarray) -> list[list[list[float]]]:
        return [[[float(v.real), float(v.imag)] for v in row] for row in block]

    @staticmethod
    def _decode_block(rows: Sequence[Sequence[Sequence[float]]]) -> np.ndarray:
        array = np.array(rows, dtype=float)
        if array.ndim != 3 or array.shape[2] != 2:
            raise ValueError(f"block entries must be [re, im] pairs, got shape {array.shape}")
        return array[..., 0] + 1j * array[..., 1]

    def model_payload(self, model: TracialModel) -> dict[str, Any]:
        """
        ``{"blocks": [...], "weights": [...], "pvms": [x][i][block]}`` with
        every matrix entry written as ``[re, im]``.
        """
        return {
            "blocks": list(model.algebra.block_dims),
            "weights": list(model.trace.weights),
            "pvms": [
                [[self._encode_block(b) for b in op.blocks] for op in pvm] for pvm in model.pvms
            ],
        }

    def dump_model(self, model: TracialModel) -> str:
        return self.dumps(self.model_payload(model))

    def load_model(self, path: PathLike) -> TracialModel:
        data = self.read_json(path)

        def build(d: dict[str, Any]) -> TracialModel:
            pvms = tuple(
                tuple(
                    BlockOperator(blocks=tuple(self._decode_block(b) for b in op))
                    for op in pvm
                )
                for pvm in d["pvms"]
            )
            return TracialModel(
                algebra=BlockAlgebra(block_dims=tuple(d["blocks"])),
                trace=TracialState(weights=tuple(d["weights"])),
                pvms=pvms,
            )

        return self._build(path, "model", build, data)

    # ── Queries and reps ─────────────────────────────────────────────

    def query_payload(self, query: SliceQuery) -> dict[str, Any]:
        return {
            "y": list(query.y),
            "x": dict(zip(pair_labels(query.n), query.x)),
            "cls": query.cls.value,
            "side": query.side.value,
        }

    def dump_queries(self, queries: Sequence[SliceQuery]) -> str:
        return self.dumps([self.query_payload(q) for q in queries])

    def load_queries(self, path: PathLike) -> list[SliceQuery]:
        """A JSON list of ``{"y": [...], "x": {"01": ..}, "cls": .., "side": ..}``."""
        data = self.read_json(path)
        if not isinstance(data, list):
            raise MalformedInputError(f"{path}: a query file holds a JSON list", "query-format")

        def build(item: dict[str, Any]) -> SliceQuery:
            n = len(item["y"])
            labels = pair_labels(n)
            missing = [label for label in labels if label not in item["x"]]
            if missing:
                raise KeyError(f"x lacks pairs {missing}")
            return SliceQuery(
                n=n,
                y=tuple(item["y"]),
                x=tuple(float(item["x"][label]) for label in labels),
                cls=CorrelationClass(item.get("cls", "q")),
                side=Side(item.get("side", "upper")),
            )

        return [self._build(path, "query", build, item) for item in data]

    def dump_rep(self, rep: Universal3Rep) -> str:
        return self.dumps(rep.to_payload())

    # ── CSV ──────────────────────────────────────────────────────────

    def dump_table(self, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    format_float(v, self._settings.float_digits)
                    if isinstance(v, (float, np.floating))
                    else v
                    for v in row
                ]
            )
        return buffer.getvalue()

    def dump_samples(self, samples: SampleSet) -> str:
        """Header ``y0..y{n-1},w01,w02,...``; one row per sampled point."""
        header = [f"y{i}" for i in range(samples.n)] + [f"w{label}" for label in pair_labels(samples.n)]
        rows = [[float(v) for v in np.concatenate([y, w])] for y, w in samples.rows()]
        return self.dump_table(header, rows)

    def load_samples(self, path: PathLike) -> SampleSet:
        try:
            with open(path, encoding="utf-8", newline="") as f:
                reader = csv.reader(f)
                header = next(reader)
                values = [[float(v) for v in row] for row in reader if row]
        except FileNotFoundError as e:
            raise MalformedInputError(f"file not found: {path}", "file") from e
        except (StopIteration, ValueError) as e:
            raise MalformedInputError(f"{path}: invalid sample CSV: {e!r}", "sample-format") from e

        ragged = [k for k, row in enumerate(values, start=1) if len(row) != len(header)]
        if ragged:
            raise MalformedInputError(
                f"{path}: data rows {ragged[:5]} do not have {len(header)} fields", "sample-format"
            )

        n = sum(1 for name in header if name.startswith("y"))
        if len(header) != n + pair_count(n) or header[:n] != [f"y{i}" for i in range(n)]:
            raise MalformedInputError(f"{path}: unexpected sample header {header}", "sample-format")
        array = np.array(values, dtype=float).reshape(-1, len(header))
        return self._build(
            path, "sample", lambda a: SampleSet(n=n, y=a[:, :n], w=a[:, n:]), array
        )

    def dump_results(self, results: Sequence[SliceResult]) -> str:
        """``query_id,value,degenerate_path,max_residual``."""
        rows = [
            [k, r.value, str(r.degenerate_path).lower(), r.max_residual]
            for k, r in enumerate(results)
        ]
        return self.dump_table(["query_id", "value", "degenerate_path", "max_residual"], rows)

    def dump_dominance(self, report: DominanceReport) -> str:
        """``query_id,bound,neighbors,max_excess,status``; empty excess for no-data rows."""
        rows = [
            [e.query_id, e.bound, e.neighbors, "" if e.max_excess is None else e.max_excess, e.status.value]
            for e in report.entries
        ]
        return self.dump_table(["query_id", "bound", "neighbors", "max_excess", "status"], rows)
