"""
Logging utilities for fracplace.

Records go to stderr through Rich so that stdout only carries reports
(tables, JSON or CSV). Module loggers live under the ``fracplace`` namespace.
"""

import logging
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

from rich.console import Console
from rich.logging import RichHandler

ROOT_LOGGER = "fracplace"
FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _resolve_level(verbose: bool, level: Union[str, int, None]) -> int:
    if verbose:
        return logging.DEBUG
    if level is None:
        return logging.INFO
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(level.upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def _console_handler(level: int, verbose: bool) -> logging.Handler:
    handler = RichHandler(
        console=Console(stderr=True),
        show_time=False,
        show_path=verbose,
        markup=False,
        rich_tracebacks=True,
    )
    handler.setLevel(level)
    return handler


def _file_handler(log_file: Path, level: int) -> Optional[logging.Handler]:
    try:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(log_file, encoding='utf-8')
    except OSError as e:
        logging.warning(f"Failed to setup file logging: {e}")
        return None
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(fmt=FILE_FORMAT, datefmt=DATE_FORMAT))
    return handler


def setup_logging(verbose: bool = False, log_file: Optional[Path] = None, suppress_output: bool = False,
                  level: Union[str, int, None] = None) -> None:
    """
    Setup logging configuration for fracplace.

    Args:
        verbose: Enable verbose (DEBUG) logging, overriding ``level``
        log_file: Optional log file path
        suppress_output: Suppress console output (for JSON and CSV output)
        level: Level name or number used when not verbose (default INFO)
    """
    log_level = _resolve_level(verbose, level)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)
        if isinstance(handler, logging.FileHandler):
            handler.close()

    if not suppress_output:
        root_logger.addHandler(_console_handler(log_level, verbose))
    if log_file:
        file_handler = _file_handler(Path(log_file), log_level)
        if file_handler is not None:
            root_logger.addHandler(file_handler)

    logging.getLogger(ROOT_LOGGER).setLevel(log_level)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger with the given name.

    Args:
        name: Logger name, e.g. ``"optimizer"``

    Returns:
        The ``fracplace.<name>`` logger
    """
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")


@contextmanager
def log_elapsed(logger: logging.Logger, label: str) -> Iterator[None]:
    """Log at DEBUG how long the wrapped block took."""
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.debug(f"{label} took {time.perf_counter() - start:.3f}s")
