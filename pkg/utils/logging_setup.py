import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(
    log_level: int = logging.INFO,
    log_file: Optional[str] = None,
    max_file_size: int = 10 * 1024 * 1024,
    backup_count: int = 3
) -> logging.Logger:
    """
    Configure the root logger for a sampler run.

    Console output belongs to utils.cli; this only attaches a rotating file
    handler (once per path) when ``log_file`` is given.

    Args:
        log_level: Level for the root logger and the file handler
        log_file: Path of the log file, or None for console-only logging
        max_file_size: Rotation threshold in bytes
        backup_count: Rotated files to keep

    Returns:
        The root logger
    """
    root_logger = logging.getLogger()
    root_logger.setLevel(min(root_logger.level or log_level, log_level))

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)

        target = os.path.abspath(log_file)
        already = any(
            isinstance(h, RotatingFileHandler) and h.baseFilename == target
            for h in root_logger.handlers
        )
        if not already:
            file_handler = RotatingFileHandler(log_file, maxBytes=max_file_size, backupCount=backup_count)
            file_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
            file_handler.setLevel(log_level)
            root_logger.addHandler(file_handler)

    # numba's compiler is chatty at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)
    logging.getLogger("matplotlib").setLevel(logging.WARNING)

    return root_logger


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
