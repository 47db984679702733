import logging
import os
import sys
from typing import Dict, Optional

# Global logger registry
_loggers: Dict[str, logging.Logger] = {}


def _default_level() -> int:
    return getattr(logging, os.getenv("RNLS_LOG_LEVEL", "INFO").upper(), logging.INFO)


def get_logger(name: str) -> logging.Logger:
    """Get or create a logger with consistent formatting"""
    if name in _loggers:
        return _loggers[name]

    logger = logging.getLogger(f"rnls.{name}")

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        formatter = logging.Formatter(
            fmt='%(asctime)s | %(name)s | %(levelname)s | %(message)s',
            datefmt='%H:%M:%S'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.setLevel(_default_level())
        logger.propagate = False

    _loggers[name] = logger
    return logger


def set_level(level: Optional[str]) -> None:
    """Apply a level name (DEBUG, INFO, ...) to every registered logger"""
    if not level:
        return
    value = getattr(logging, level.upper(), None)
    if not isinstance(value, int):
        raise ValueError(f"Unknown log level: {level}")
    for logger in _loggers.values():
        logger.setLevel(value)
