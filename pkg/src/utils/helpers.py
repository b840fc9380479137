"""
Helper functions shared by the CLI and the artifact codecs.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from src.domain import MalformedInputError, pair_indices


def parse_float_list(text: str) -> list[float]:
    """
    Parse a comma-separated list of reals such as ``".5,.5,.5"``.

    Raises:
        MalformedInputError: If any item is not a number.
    """
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise MalformedInputError(f"cannot parse number list {text!r}: {e}", "number-list")


def pair_label(i: int, j: int) -> str:
    """Key of pair (i, j) in query files: ``"01"``, ``"02"``, ``"12"``."""
    return f"{i}{j}"


def pair_labels(n: int) -> list[str]:
    return [pair_label(i, j) for i, j in pair_indices(n)]


def format_float(value: float, digits: int = 17) -> str:
    """Format a real with ``digits`` significant digits (general format)."""
    return f"{value:.{digits}g}"


def round_floats(payload: Any, digits: int = 17) -> Any:
    """
    Recursively round every float in a JSON-ready payload to ``digits`` significant digits.

    Keeps machine output byte-identical across runs for a fixed input.
    """
    if isinstance(payload, (float, np.floating)):
        return float(format_float(float(payload), digits))
    if isinstance(payload, (np.integer,)):
        return int(payload)
    if isinstance(payload, np.ndarray):
        return round_floats(payload.tolist(), digits)
    if isinstance(payload, dict):
        return {k: round_floats(v, digits) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [round_floats(v, digits) for v in payload]
    return payload
