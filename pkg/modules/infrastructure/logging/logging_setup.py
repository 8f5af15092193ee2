# modules/infrastructure/logging/logging_setup.py
from __future__ import annotations

import json
import logging
import os
import time
from contextvars import ContextVar
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional, Union

import coloredlogs

ISO_DATEFMT = "%Y-%m-%dT%H:%M:%S"

# ---------- context ----------

_SESSION_ID = f"session-{int(time.time())}"
_corr_id: ContextVar[Optional[str]] = ContextVar("corr_id", default=None)


class ContextFilter(logging.Filter):
    def filter(self, record: logging.LogRecord) -> bool:
        record.session_id = _SESSION_ID
        record.correlation_id = _corr_id.get() or "-"
        return True


# ---------- JSON formatter ----------


class JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        data: Dict[str, Any] = {
            "ts": self.formatTime(record, datefmt=ISO_DATEFMT),
            "level": record.levelname,
            "name": record.name,
            "msg": record.getMessage(),
            "session": getattr(record, "session_id", "-"),
            "corr": getattr(record, "correlation_id", "-"),
        }
        metrics = getattr(record, "metrics", None)
        if metrics:
            data["metrics"] = metrics
        if record.exc_info:
            data["exc"] = self.formatException(record.exc_info)
        return json.dumps(data, ensure_ascii=False)


# ---------- setup ----------


def _env_level(default: Union[int, str]) -> int:
    if isinstance(default, str):
        default = logging.getLevelName(default.upper())
        if not isinstance(default, int):
            default = logging.INFO
    val = os.getenv("HGVAE_LOG_LEVEL", "")
    mapping = {
        "DEBUG": logging.DEBUG,
        "INFO": logging.INFO,
        "WARNING": logging.WARNING,
        "ERROR": logging.ERROR,
        "CRITICAL": logging.CRITICAL,
    }
    return mapping.get(val.upper(), default)


def setup_logging(
    level: Union[int, str],
    log_dir: Union[Path, str],
    json_enabled: bool,
    max_bytes: int,
    backup_count: int,
) -> None:
    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    text_path = log_dir / "hgvae.log"
    json_path = log_dir / "hgvae.jsonl"

    root = logging.getLogger()
    if any(getattr(h, "_hgvae_handler", False) for h in root.handlers):
        return
    root.setLevel(_env_level(level))

    ctx = ContextFilter()

    # text file
    fh = RotatingFileHandler(
        str(text_path), maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
    )
    fh.setLevel(logging.DEBUG)
    fh.setFormatter(
        logging.Formatter(
            fmt="%(asctime)s [%(levelname)s] %(name)s %(session_id)s %(correlation_id)s: %(message)s",
            datefmt=ISO_DATEFMT,
        )
    )
    fh.addFilter(ctx)

    # console (stderr, so stdout stays free for command output)
    ch = logging.StreamHandler()
    ch.setLevel(root.level)
    ch.setFormatter(
        coloredlogs.ColoredFormatter(
            fmt="%(asctime)s %(levelname)s %(name)s: %(message)s", datefmt=ISO_DATEFMT
        )
    )

    handlers = [fh, ch]

    # json file
    if json_enabled:
        jh = RotatingFileHandler(
            str(json_path), maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
        )
        jh.setLevel(logging.DEBUG)
        jh.setFormatter(JsonFormatter())
        jh.addFilter(ctx)
        handlers.append(jh)

    for h in handlers:
        h._hgvae_handler = True  # type: ignore[attr-defined]
        root.addHandler(h)


def teardown_logging() -> None:
    """Remove and close the handlers installed by ``setup_logging``."""
    root = logging.getLogger()
    for h in list(root.handlers):
        if getattr(h, "_hgvae_handler", False):
            root.removeHandler(h)
            h.close()


# ---------- helper API ----------


def set_correlation_id(cid: Optional[str]) -> None:
    _corr_id.set(cid)


def get_logger(name: Optional[str] = None) -> logging.Logger:
    return logging.getLogger(name or __name__)
