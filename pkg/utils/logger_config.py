import os
import logging
import threading
from datetime import datetime
from logging.handlers import RotatingFileHandler
from typing import Optional

from utils import settings

# Thread safety lock for logger setup
_logger_lock = threading.Lock()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(logger_name: str = "", log_dir: Optional[str] = None, level: Optional[str] = None):
    """
    Setup logging with year/month directory structure.
    Thread-safe implementation; calling it again replaces the handlers.

    Args:
        logger_name: The name of the logger to configure ("" is the root logger)
        log_dir: Base directory for log files, defaults to FORGE_LOG_DIR
        level: Level name, defaults to FORGE_LOG_LEVEL

    Returns:
        Configured logger instance
    """
    with _logger_lock:
        logs_base_dir = log_dir or settings.LOG_DIR
        log_level = getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO)

        # Month directory (01-January, 02-February, etc.)
        now = datetime.now()
        month_dir = os.path.join(logs_base_dir, str(now.year), now.strftime("%m-%B"))
        os.makedirs(month_dir, exist_ok=True)

        log_file = os.path.join(month_dir, "forge.log")

        logger = logging.getLogger(logger_name)
        logger.setLevel(log_level)

        # Clear existing handlers if any
        if logger.handlers:
            for handler in list(logger.handlers):
                handler.close()
            logger.handlers.clear()

        # File handler with rotation (10 MB max size, keep 5 backup files)
        file_handler = RotatingFileHandler(log_file, maxBytes=10*1024*1024, backupCount=5, encoding="utf-8")
        file_handler.setLevel(log_level)

        # Console handler on stderr, stdout stays reserved for reports
        console_handler = logging.StreamHandler()
        console_handler.setLevel(log_level)

        formatter = logging.Formatter(LOG_FORMAT)
        file_handler.setFormatter(formatter)
        console_handler.setFormatter(formatter)

        logger.addHandler(file_handler)
        logger.addHandler(console_handler)

        return logger

