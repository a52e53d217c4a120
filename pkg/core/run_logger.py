"""
Run Logger Module
Appends one row per harness invocation to CSV files organized by month
"""
import csv
import logging
import os
from datetime import datetime
from typing import Optional

from utils import settings

HEADERS = ["timestamp", "command", "seed", "status", "output", "detail"]


class RunLogger:
    def __init__(self, base_dir: Optional[str] = None):
        self.base_dir = base_dir or settings.RUN_LOG_DIR
        self.logger = logging.getLogger(__name__)
        os.makedirs(self.base_dir, exist_ok=True)
        self.logger.debug(f"Run ledger stored in: {self.base_dir}")

    def _get_log_path(self, timestamp: datetime) -> str:
        """Path of the ledger for the timestamp's month"""
        year_dir = os.path.join(self.base_dir, str(timestamp.year))
        os.makedirs(year_dir, exist_ok=True)
        return os.path.join(year_dir, f"runs_{timestamp.strftime('%Y_%m')}.csv")

    def log_run(self, timestamp: datetime, command: str, seed: Optional[int], status: str,
                output: Optional[str] = None, detail: str = "") -> Optional[str]:
        """Record one run; failures to write are logged, never raised"""
        try:
            log_path = self._get_log_path(timestamp)
            new_file = not os.path.exists(log_path)
            with open(log_path, "a", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                if new_file:
                    writer.writerow(HEADERS)
                writer.writerow([
                    timestamp.isoformat(),
                    command,
                    "" if seed is None else seed,
                    status,
                    output or "-",
                    detail,
                ])
            self.logger.info(f"Run logged: {command} (seed {seed}) - {status}")
            return log_path
        except OSError as e:
            self.logger.error(f"Error writing run ledger: {e}")
            return None
