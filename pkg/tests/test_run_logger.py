import csv
import logging
from datetime import datetime

from core.run_logger import HEADERS, RunLogger
from utils.logger_config import setup_logging


def test_log_run_creates_monthly_file(tmp_path):
    ledger = RunLogger(str(tmp_path))
    path = ledger.log_run(datetime(2025, 3, 14, 9, 30), "forge", 7, "completed", "r.json", "2 levels")
    assert path == str(tmp_path / "2025" / "runs_2025_03.csv")
    lines = (tmp_path / "2025" / "runs_2025_03.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(HEADERS)
    assert lines[1] == "2025-03-14T09:30:00,forge,7,completed,r.json,2 levels"


def test_rows_append_in_order(tmp_path):
    ledger = RunLogger(str(tmp_path))
    ledger.log_run(datetime(2025, 3, 1), "forge", 1, "completed")
    ledger.log_run(datetime(2025, 3, 2), "verify", 2, "flagged")
    path = ledger.log_run(datetime(2025, 3, 3), "probe", None, "failed", detail="SchemaError: $.coding: missing")
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert [row["command"] for row in rows] == ["forge", "verify", "probe"]
    assert rows[2]["seed"] == ""
    assert rows[2]["output"] == "-"
    assert rows[2]["detail"] == "SchemaError: $.coding: missing"


def test_unwritable_ledger_returns_none(tmp_path):
    ledger = RunLogger(str(tmp_path))
    (tmp_path / "2025").write_text("not a directory", encoding="utf-8")
    assert ledger.log_run(datetime(2025, 3, 1), "forge", 1, "completed") is None


def test_setup_logging_is_idempotent(tmp_path):
    logger = setup_logging("forge_test", log_dir=str(tmp_path), level="debug")
    setup_logging("forge_test", log_dir=str(tmp_path), level="debug")
    assert len(logger.handlers) == 2
    assert logger.level == logging.DEBUG
    logger.info("hello")
    for handler in logger.handlers:
        handler.flush()
    files = list(tmp_path.rglob("forge.log"))
    assert len(files) == 1
    assert "hello" in files[0].read_text(encoding="utf-8")
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)
