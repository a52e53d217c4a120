import csv
import io
import json
from pathlib import Path

import pytest

from core.coding import base_coding
from core.exceptions import PreconditionError, SchemaError
from core.forge import ForgeResult, forge
from core.predictors import always_stop_rule, constant_predictor
from core.reports import CSV_HEADER, parse_forge_result, read_coding, read_forge_result, write_report
from core.verifier import verify

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def golden_text():
    return (GOLDEN / "forge_result.json").read_text(encoding="utf-8")


def test_golden_forge_result_is_stable(golden_text):
    result = parse_forge_result(json.loads(golden_text))
    assert [level.N for level in result.levels] == [2, 3]
    assert result.coding.zero_states == (5, 7)
    assert write_report(result, "json").decode("utf-8") == golden_text


def test_empty_levels():
    empty = ForgeResult((), base_coding(), {"predictor": "kt:1", "stop_rule": "always"})
    data = json.loads(write_report(empty, "json"))
    assert data["levels"] == []
    assert parse_forge_result(data).levels == ()


def test_round_trip(fast_config):
    result = forge(1, constant_predictor(0.5), always_stop_rule(), fast_config)
    text = write_report(result, "json")
    back = parse_forge_result(json.loads(text))
    assert back.to_json() == result.to_json()
    assert back.coding == result.coding


def test_csv_has_one_row_per_level(golden_text):
    result = parse_forge_result(json.loads(golden_text))
    rows = list(csv.reader(io.StringIO(write_report(result, "csv").decode("utf-8"))))
    assert rows[0] == CSV_HEADER
    assert len(rows) == len(result.levels) + 1
    assert rows[1][:2] == ["1", "2"]
    assert rows[1][CSV_HEADER.index("I_side")] == "B+"
    assert rows[1][CSV_HEADER.index("min_gap")] == ""


def test_verify_report_csv(golden_text):
    result = parse_forge_result(json.loads(golden_text))
    report = verify(result, 500, seed=1, suffixes=2, prefixes=5, oracle_length=4)
    rows = list(csv.reader(io.StringIO(write_report(report, "csv").decode("utf-8"))))
    assert len(rows) == 3
    assert rows[1][CSV_HEADER.index("samples")] == "500"
    assert float(rows[1][CSV_HEADER.index("min_gap")]) == 0.5
    document = json.loads(write_report(report, "json"))
    assert document["config"]["source"]["seed"] == 7
    assert set(document["global"]) >= {"continuity_max_deviation", "oracle_max_error"}


def test_unknown_format(golden_text):
    with pytest.raises(PreconditionError):
        write_report(parse_forge_result(json.loads(golden_text)), "xml")


@pytest.mark.parametrize(
    "mutate,field",
    [
        (lambda d: d.pop("coding"), "$.coding"),
        (lambda d: d.pop("config"), "$.config"),
        (lambda d: d["config"].pop("predictor"), "$.config.predictor"),
        (lambda d: d["config"].__setitem__("predictor", "oracle:3"), "$.config.predictor"),
        (lambda d: d["config"].__setitem__("stop_rule", "delayed:x"), "$.config.stop_rule"),
        (lambda d: d.__setitem__("levels", {}), "$.levels"),
        (lambda d: d["levels"][0].__setitem__("I_side", "B"), "$.levels[0].I_side"),
        (lambda d: d["levels"][1].__setitem__("malicious_bit", 2), "$.levels[1].malicious_bit"),
        (lambda d: d["levels"][0]["p_A"].__setitem__("lo", "abc"), "$.levels[0].p_A.lo"),
        (lambda d: d["levels"][0]["p_A"].__setitem__("hi", 0.25), "$.levels[0].p_A.hi"),
        (lambda d: d["levels"][1].__setitem__("N", 2), "$.levels[1].N"),
        (lambda d: d["levels"][1].__setitem__("j", 5), "$.levels[1].j"),
        (lambda d: d["levels"][0].pop("samples_used"), "$.levels[0].samples_used"),
        (lambda d: d["levels"][1].__setitem__("malicious_bit", 1), "$.coding"),
    ],
)
def test_schema_errors(golden_text, mutate, field):
    data = json.loads(golden_text)
    mutate(data)
    with pytest.raises(SchemaError) as info:
        parse_forge_result(data)
    assert info.value.field == field


def test_read_files(tmp_path, golden_text):
    path = tmp_path / "r.json"
    path.write_text(golden_text, encoding="utf-8")
    assert read_forge_result(str(path)).levels[1].N == 3
    assert read_coding(str(path)).zero_states == (5, 7)
    assert read_coding(str(GOLDEN / "coding.json")).zero_states == (5,)


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(SchemaError):
        read_forge_result(str(path))
