"""Centralized logging configuration module.

Every module logger hangs under the ``fkdet`` namespace; handlers live on that
parent only, so a run gets one console stream (stderr, leaving stdout to the
report summary) and at most one rotating file.
"""

import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from src.config import settings

ROOT_NAME = "fkdet"


class LoggerConfig:
    """Configuration for application logging."""

    LOG_DIR = Path(settings.log_dir) if settings.log_dir else None
    LOG_FILE = LOG_DIR / "fkdet.log" if LOG_DIR else None
    LOG_LEVEL = getattr(logging, settings.log_level.upper(), logging.INFO)
    LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
    MAX_BYTES = 10 * 1024 * 1024  # 10 MB
    BACKUP_COUNT = 5


_console: Optional[logging.Handler] = None


def _configure_root() -> logging.Logger:
    global _console
    root = logging.getLogger(ROOT_NAME)
    if _console is not None:
        return root

    root.setLevel(logging.DEBUG)
    root.propagate = False
    formatter = logging.Formatter(LoggerConfig.LOG_FORMAT, datefmt=LoggerConfig.DATE_FORMAT)

    _console = logging.StreamHandler()
    _console.setLevel(LoggerConfig.LOG_LEVEL)
    _console.setFormatter(formatter)
    root.addHandler(_console)

    # empty FKDET_LOG_DIR disables the file
    if LoggerConfig.LOG_FILE is not None:
        try:
            LoggerConfig.LOG_DIR.mkdir(parents=True, exist_ok=True)
            file_handler = logging.handlers.RotatingFileHandler(
                LoggerConfig.LOG_FILE,
                maxBytes=LoggerConfig.MAX_BYTES,
                backupCount=LoggerConfig.BACKUP_COUNT,
            )
        except OSError as e:
            root.warning(f"File logging disabled: {e}")
        else:
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(formatter)
            root.addHandler(file_handler)
    return root


def set_console_level(level: int) -> None:
    """Change what reaches stderr; the log file keeps everything."""
    _configure_root()
    _console.setLevel(level)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger below the ``fkdet`` namespace.

    Args:
        name: Module name (typically __name__); ``src.fk`` becomes ``fkdet.fk``

    Returns:
        Logger instance
    """
    root = _configure_root()
    leaf = name.split(".", 1)[1] if name.startswith("src.") else name
    if leaf in ("", ROOT_NAME, "__main__"):
        return root
    return root.getChild(leaf)
