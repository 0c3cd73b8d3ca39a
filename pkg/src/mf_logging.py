"""
mfspec: structured JSON event logging

One JSON object per line, same event shape as the experiment runners:
{"timestamp": ..., "event": ..., **fields}
"""

import logging
import os
import sys
from datetime import datetime, timezone

from pythonjsonlogger import jsonlogger

_CONFIGURED = False

# LogRecord attributes; `extra` may not overwrite them
_RESERVED = frozenset(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {"message", "asctime"}


def _configure_root():
    """Attach a JSON formatter to the mfspec logger tree once"""
    global _CONFIGURED
    if _CONFIGURED:
        return

    handler = logging.StreamHandler(sys.stderr)
    # Message holds the event name; fields arrive through `extra`
    handler.setFormatter(jsonlogger.JsonFormatter("%(message)s"))

    root = logging.getLogger("mfspec")
    root.addHandler(handler)
    root.setLevel(os.getenv("MFSPEC_LOG_LEVEL", "INFO").upper())
    root.propagate = False
    _CONFIGURED = True


def get_logger(name: str) -> logging.Logger:
    """Return a child of the `mfspec` logger with JSON output configured"""
    _configure_root()
    return logging.getLogger(f"mfspec.{name}")


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def log_event(logger: logging.Logger, event: str, level: int = logging.INFO, **kwargs):
    """Log structured JSON event; fields named like LogRecord attributes get a `field_` prefix"""
    fields = {f"field_{k}" if k in _RESERVED else k: v for k, v in kwargs.items()}
    logger.log(level, event, extra={"event": event, "timestamp": utc_timestamp(), **fields})
