"""
Stage timing: logs stage name, status and duration for each pipeline stage.
"""
import logging
import time
from contextlib import contextmanager

logger = logging.getLogger(__name__)


@contextmanager
def stage_timer(name: str):
    """Log ``stage <name> <status> <duration>ms`` when the block exits."""
    start = time.monotonic()
    status = "ok"
    try:
        yield
    except BaseException:
        status = "failed"
        raise
    finally:
        duration_ms = (time.monotonic() - start) * 1000
        logger.info("stage %s %s %.0fms", name, status, duration_ms)
