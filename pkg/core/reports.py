"""
Reports Module
Serialization of forge results and verify reports, and schema-checked reading.

JSON documents are written with a fixed key order and probabilities as
12-significant-digit strings, so equal inputs give byte-identical files.
"""
import csv
import io
import json
import logging
from typing import Any, Dict, List, Union

from core.coding import CodingFunction
from core.exceptions import PreconditionError, SchemaError
from core.forge import SIDE_MINUS, SIDE_PLUS, Estimate, ForgeResult, LevelRecord, format_prob
from core.predictors import parse_predictor, parse_stop_rule
from core.verifier import ProbeReport, VerifyReport

# Setup logger for this module
logger = logging.getLogger(__name__)

FORMATS = ("json", "csv")

CSV_HEADER = [
    "j", "N", "p_A", "p_A_lo", "p_A_hi", "p_B_plus", "p_B_minus", "malicious_bit",
    "I_side", "p_I", "p_I_lo", "p_I_hi", "truth", "min_gap", "samples",
]

Report = Union[ForgeResult, VerifyReport, ProbeReport]


def _csv_rows(report: Report) -> List[List[Any]]:
    if isinstance(report, ProbeReport):
        raise PreconditionError("Probe reports are written as JSON only")
    rows = []
    if isinstance(report, VerifyReport):
        for forged, checked in zip(report.source.levels, report.levels):
            rows.append([
                forged.j, forged.N,
                format_prob(forged.p_A.est), format_prob(forged.p_A.lo), format_prob(forged.p_A.hi),
                format_prob(forged.p_B_plus.est), format_prob(forged.p_B_minus.est),
                forged.malicious_bit, forged.I_side,
                format_prob(checked.p_I.est), format_prob(checked.p_I.lo), format_prob(checked.p_I.hi),
                format_prob(forged.truth_at_stop),
                "" if checked.min_gap is None else format_prob(checked.min_gap),
                checked.samples,
            ])
        return rows
    for level in report.levels:
        rows.append([
            level.j, level.N,
            format_prob(level.p_A.est), format_prob(level.p_A.lo), format_prob(level.p_A.hi),
            format_prob(level.p_B_plus.est), format_prob(level.p_B_minus.est),
            level.malicious_bit, level.I_side,
            format_prob(level.p_I.est), format_prob(level.p_I.lo), format_prob(level.p_I.hi),
            format_prob(level.truth_at_stop), "", level.samples_used,
        ])
    return rows


def write_report(report: Report, fmt: str = "json") -> bytes:
    """
    Serialize a ForgeResult or VerifyReport

    Args:
        report: The value to write
        fmt: "json" (full document) or "csv" (one row per level)

    Returns:
        UTF-8 encoded bytes
    """
    if fmt == "json":
        return (json.dumps(report.to_json(), indent=2) + "\n").encode("utf-8")
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(_csv_rows(report))
        return buffer.getvalue().encode("utf-8")
    raise PreconditionError(f"Unknown format '{fmt}'. Valid formats are: {', '.join(FORMATS)}")


def _require(data: Dict[str, Any], key: str, where: str) -> Any:
    if key not in data:
        raise SchemaError(f"{where}.{key}", "missing")
    return data[key]


def _int_field(data: Dict[str, Any], key: str, where: str, minimum: int = 0) -> int:
    value = _require(data, key, where)
    if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
        raise SchemaError(f"{where}.{key}", f"must be an integer >= {minimum}")
    return value


def _prob_field(data: Dict[str, Any], key: str, where: str) -> float:
    value = _require(data, key, where)
    if not isinstance(value, str):
        raise SchemaError(f"{where}.{key}", "must be a decimal string")
    try:
        parsed = float(value)
    except ValueError:
        raise SchemaError(f"{where}.{key}", f"not a number: {value!r}")
    if not 0.0 <= parsed <= 1.0:
        raise SchemaError(f"{where}.{key}", "must lie in [0, 1]")
    return parsed


def _estimate_field(data: Dict[str, Any], key: str, where: str) -> Estimate:
    value = _require(data, key, where)
    name = f"{where}.{key}"
    if not isinstance(value, dict):
        raise SchemaError(name, "expected an object")
    est = Estimate(_prob_field(value, "est", name), _prob_field(value, "lo", name), _prob_field(value, "hi", name))
    if not est.lo <= est.hi:
        raise SchemaError(name, "lo must not exceed hi")
    return est


def _identifier_field(config: Dict[str, Any], key: str, parse) -> str:
    value = _require(config, key, "$.config")
    if not isinstance(value, str):
        raise SchemaError(f"$.config.{key}", "must be a string")
    try:
        parse(value)
    except PreconditionError as e:
        raise SchemaError(f"$.config.{key}", str(e))
    return value


def _parse_level(data: Any, where: str) -> LevelRecord:
    if not isinstance(data, dict):
        raise SchemaError(where, "expected an object")
    bit = _require(data, "malicious_bit", where)
    if bit not in (0, 1) or isinstance(bit, bool):
        raise SchemaError(f"{where}.malicious_bit", "must be 0 or 1")
    side = _require(data, "I_side", where)
    if side not in (SIDE_PLUS, SIDE_MINUS):
        raise SchemaError(f"{where}.I_side", f"must be '{SIDE_PLUS}' or '{SIDE_MINUS}'")
    return LevelRecord(
        j=_int_field(data, "j", where, 1),
        N=_int_field(data, "N", where, 2),
        p_A=_estimate_field(data, "p_A", where),
        p_B_plus=_estimate_field(data, "p_B_plus", where),
        p_B_minus=_estimate_field(data, "p_B_minus", where),
        malicious_bit=bit,
        I_side=side,
        p_I=_estimate_field(data, "p_I", where),
        truth_at_stop=_prob_field(data, "truth_at_stop", where),
        samples_used=_int_field(data, "samples_used", where),
    )


def parse_forge_result(data: Any) -> ForgeResult:
    """Validate a decoded ForgeResult document, naming the first offending field"""
    if not isinstance(data, dict):
        raise SchemaError("$", "expected an object")
    config = _require(data, "config", "$")
    if not isinstance(config, dict):
        raise SchemaError("$.config", "expected an object")
    _identifier_field(config, "predictor", parse_predictor)
    _identifier_field(config, "stop_rule", parse_stop_rule)
    raw_levels = _require(data, "levels", "$")
    if not isinstance(raw_levels, list):
        raise SchemaError("$.levels", "expected a list")
    levels = tuple(_parse_level(entry, f"$.levels[{i}]") for i, entry in enumerate(raw_levels))
    for i, level in enumerate(levels):
        if level.j != i + 1:
            raise SchemaError(f"$.levels[{i}].j", f"expected {i + 1}")
        if i and level.N <= levels[i - 1].N:
            raise SchemaError(f"$.levels[{i}].N", "level indices must be strictly increasing")
    coding = CodingFunction.from_json(_require(data, "coding", "$"), where="$.coding")
    result = ForgeResult(levels, coding, config)
    if result.coding_at(len(levels)) != coding:
        raise SchemaError("$.coding", "does not match the malicious bits of the levels")
    return result


def _load_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise SchemaError("$", f"invalid JSON in {path}: {e}")


def read_forge_result(path: str) -> ForgeResult:
    result = parse_forge_result(_load_json(path))
    logger.info(f"Read {len(result.levels)} forged levels from {path}")
    return result


def read_coding(path: str) -> CodingFunction:
    """Load a coding file, or the coding of a ForgeResult document"""
    data = _load_json(path)
    if isinstance(data, dict) and "levels" in data:
        return parse_forge_result(data).coding
    return CodingFunction.from_json(data, where="$")
