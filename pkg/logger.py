# logger.py
"""Logging configuration; records carry the seed and replication id of the simulation that emitted them."""

import logging
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from config import Config

_replication: ContextVar[Optional[Dict[str, Any]]] = ContextVar("replication", default=None)


class ReplicationFilter(logging.Filter):
    """Adds `seed` and `replication` to every record; '-' outside a replication."""

    def filter(self, record: logging.LogRecord) -> bool:
        context = _replication.get() or {}
        record.seed = context.get("seed", "-")
        record.replication = context.get("replication", "-")
        return True


@contextmanager
def replication_context(seed: int, replication: int):
    """Tag log records emitted inside the block with one replication's seed and index."""
    token = _replication.set({"seed": seed, "replication": replication})
    try:
        yield
    finally:
        _replication.reset(token)


def setup_logging(log_dir: Optional[Path] = None, level: Optional[str] = None):
    """Configure logging for the application."""
    log_dir = Path(log_dir or Config.LOG_FOLDER)
    log_dir.mkdir(parents=True, exist_ok=True)
    level = getattr(logging, (level or Config.LOG_LEVEL).upper())

    log_filename = log_dir / f"rcm_toolkit_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"

    handlers = [logging.FileHandler(log_filename, encoding='utf-8'), logging.StreamHandler(sys.stdout)]
    for handler in handlers:
        handler.setLevel(level)
        handler.setFormatter(logging.Formatter(Config.LOG_FORMAT))
        # Handler-level, so records from every module's logger get the fields
        handler.addFilter(ReplicationFilter())

    logging.basicConfig(level=level, handlers=handlers, force=True)

    logger = logging.getLogger(__name__)
    logger.debug(f"Logging to {log_filename}")
    return logger
