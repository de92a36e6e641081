# test_logger.py
import logging

import pytest

from config import Config
from logger import ReplicationFilter, replication_context, setup_logging


def _record(message="hello"):
    return logging.LogRecord("stats", logging.INFO, __file__, 1, message, None, None)


def test_filter_stamps_replication_fields():
    flt = ReplicationFilter()
    outside = _record()
    assert flt.filter(outside)
    assert (outside.seed, outside.replication) == ("-", "-")
    with replication_context(987654, 3):
        inside = _record()
        flt.filter(inside)
        with replication_context(11, 4):
            nested = _record()
            flt.filter(nested)
        after = _record()
        flt.filter(after)
    assert (inside.seed, inside.replication) == (987654, 3)
    assert (nested.seed, nested.replication) == (11, 4)
    assert (after.seed, after.replication) == (987654, 3)


def test_context_resets_after_an_error():
    with pytest.raises(RuntimeError):
        with replication_context(5, 0):
            raise RuntimeError("boom")
    record = _record()
    ReplicationFilter().filter(record)
    assert record.seed == "-"


def test_log_file_carries_seed_and_replication(tmp_path):
    setup_logging(tmp_path, "INFO")
    try:
        with replication_context(42, 7):
            logging.getLogger("counts").warning("denominator vanished")
        logging.getLogger("stats").info("between replications")
        for handler in logging.getLogger().handlers:
            handler.flush()
        text = next(tmp_path.glob("rcm_toolkit_*.log")).read_text(encoding="utf-8")
    finally:
        for handler in logging.getLogger().handlers[:]:
            handler.close()
            logging.getLogger().removeHandler(handler)
    assert "counts - WARNING - [seed=42 rep=7] - denominator vanished" in text
    assert "stats - INFO - [seed=- rep=-] - between replications" in text
    assert "%(seed)s" in Config.LOG_FORMAT
