# core/utils/logging_utils.py
import logging
import os
import sys
from typing import Optional

DEFAULT_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"

_CONFIGURED = False


def configure_logging(level_name: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """
    Configure the root logger once.
    Logs go to stderr so report tables on stdout stay clean; LOG_FILE adds a file copy.
    """
    global _CONFIGURED
    level_name = (level_name or os.getenv("LOG_LEVEL", "INFO")).upper()
    level = getattr(logging, level_name, logging.INFO)
    handlers = [logging.StreamHandler(sys.stderr)]
    log_file = log_file or os.getenv("LOG_FILE")
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(level=level, format=os.getenv("LOG_FORMAT", DEFAULT_FORMAT), handlers=handlers, force=True)
    _CONFIGURED = True


def get_logger(name: str) -> logging.Logger:
    if not _CONFIGURED:
        configure_logging()
    return logging.getLogger(name)


def set_level(level_name: str) -> None:
    """Change the root level after start-up (the CLI's --verbose flag)."""
    if not _CONFIGURED:
        configure_logging(level_name)
    logging.getLogger().setLevel(getattr(logging, level_name.upper(), logging.INFO))
