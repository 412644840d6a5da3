"""
Logging configuration for the application
"""
import logging
import sys
from app.config import settings


def _level() -> int:
    if settings.DEBUG:
        return logging.DEBUG
    return getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)


def setup_logger(name: str = __name__) -> logging.Logger:
    """
    Set up and configure logger

    Output goes to stderr; stdout is reserved for command results.

    Args:
        name: Logger name (typically __name__)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        logger.setLevel(_level())

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(_level())

        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        )
        console_handler.setFormatter(formatter)

        logger.addHandler(console_handler)
        logger.propagate = False

    return logger
