"""Structured JSON logging for training runs.

Console output is human-readable; the per-run log file holds one JSON
object per line so learning curves can be recovered from it.
"""

import json
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any

logger = logging.getLogger("a7")

# Extra fields copied into the JSON record when passed via extra={...}
_EXTRA_KEYS = (
    "step",
    "score",
    "teacher_queries",
    "reuse_firings",
    "loss",
    "seed",
    "strategy",
    "auc",
    "best_score",
    "epoch",
)


class JSONFormatter(logging.Formatter):
    """Format log records as JSON."""

    def format(self, record: logging.LogRecord) -> str:
        log_data: dict[str, Any] = {
            "timestamp": self.formatTime(record),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        for key in _EXTRA_KEYS:
            if hasattr(record, key):
                log_data[key] = getattr(record, key)
        return json.dumps(log_data)


def setup_logging(verbose: bool = False, log_file: Path | None = None) -> logging.Logger:
    """Configure the ``a7`` logger.

    Safe to call once per run: handlers installed by a previous call are
    replaced, so sweeps that run several trainings in one process do not
    write every line twice.
    """
    root = logging.getLogger("a7")
    root.setLevel(logging.DEBUG)
    root.propagate = False
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter(
        "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    ))
    console.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.addHandler(console)

    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        # 10MB, keep 5
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
        )
        file_handler.setFormatter(JSONFormatter())
        file_handler.setLevel(logging.DEBUG)
        root.addHandler(file_handler)

    return root
