import json
import os
from pathlib import Path

import jsonschema
import pytest

from quadnest.branchstats import (classification_report, report_to_csv,
                                  report_to_json)
from quadnest.cli import _default_precision, main
from quadnest.nest import nest_report_to_dict

SCHEMA_DIR = Path(__file__).resolve().parents[1] / "schemas"


def load_schema(name):
    return json.loads((SCHEMA_DIR / name).read_text())


def test_nest_report_validates(nest19):
    d = nest_report_to_dict(nest19)
    jsonschema.validate(d, load_schema("nest-report.schema.json"))


def test_verdict_validates(tmp_path):
    out = tmp_path / "v.json"
    assert main(["classify", "--a", "2", "--out", str(out)]) == 0
    jsonschema.validate(json.loads(out.read_text()),
                        load_schema("verdict.schema.json"))


def test_sweep_summary_validates(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--a-min", "0.5", "--a-max", "1", "--grid", "2",
                 "--out", str(out)]) == 0
    summary = json.loads((tmp_path / "s.csv.summary.json").read_text())
    jsonschema.validate(summary, load_schema("sweep.schema.json"))


def test_classification_report_round_trip(nest18, consts):
    rows = classification_report(nest18.levels, consts)
    assert rows
    kinds = {r["kind"] for r in rows}
    assert kinds == {"branch", "landing"}
    csv_text = report_to_csv(rows)
    header = csv_text.splitlines()[0].split(",")
    assert header[:4] == ["level", "kind", "id", "time"]
    assert len(csv_text.splitlines()) == len(rows) + 1
    payload = json.loads(report_to_json(rows, consts))
    assert payload["constants"]["profile"] == "practical"
    assert len(payload["rows"]) == len(rows)


def test_env_var_precision(monkeypatch):
    monkeypatch.setenv("QUADNEST_PRECISION", "192")
    assert _default_precision() == 192
    monkeypatch.setenv("QUADNEST_PRECISION", "junk")
    assert _default_precision() == 256
