"""
Logging for the command-line toolkit.

Records go to stderr, one JSON object each by default, or as plain text
lines with ``LOG_FORMAT=text``. Fields passed through ``extra`` (sizes,
residuals, seeds) become top-level keys; numpy values are converted to
plain JSON numbers and lists.
"""

from __future__ import annotations

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Optional

import numpy as np

from src.config.settings import LogLevel

# Attributes every LogRecord carries; anything else came in through `extra`.
_RECORD_ATTRS = frozenset(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {
    "message",
    "asctime",
    "taskName",
}

TEXT_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Libraries whose own loggers stay at WARNING whatever the toolkit level.
QUIET_LOGGERS = ("numpy", "scipy", "concurrent.futures")


def _to_json(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


class JSONFormatter(logging.Formatter):
    """One JSON object per record: timestamp, level, logger, message, then extras."""

    def format(self, record: logging.LogRecord) -> str:
        entry: dict[str, Any] = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        entry.update(
            (key, value) for key, value in vars(record).items() if key not in _RECORD_ATTRS
        )
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        return json.dumps(entry, default=_to_json)


def _handlers(log_file: Optional[str]) -> list[logging.Handler]:
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    return handlers


def configure_logging(
    level: LogLevel = LogLevel.WARNING,
    log_format: str = "json",
    log_file: Optional[str] = None,
) -> None:
    """Replace the root handlers with a stderr handler and an optional file handler."""
    formatter = JSONFormatter() if log_format == "json" else logging.Formatter(TEXT_FORMAT)
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(level.value)
    for handler in _handlers(log_file):
        handler.setFormatter(formatter)
        root.addHandler(handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)
