import argparse
import csv
import json

import pytest

from hresolvent import cli


def test_parse_dims():
    assert cli.parse_dims("2..6") == [2, 3, 4, 5, 6]
    assert cli.parse_dims("2,4") == [2, 4]
    assert cli.parse_dims("2..3,5") == [2, 3, 5]
    for bad in ("6..2", "a", "2-4"):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_dims(bad)


def test_parse_lambda():
    assert cli.parse_lambda("1+0.5i") == 1 + 0.5j
    assert cli.parse_lambda("-2") == -2
    assert cli.parse_lambda("3i") == 3j
    assert cli.parse_lambda("1 - 2j") == 1 - 2j
    with pytest.raises(argparse.ArgumentTypeError):
        cli.parse_lambda("one")


def test_parse_positive():
    assert cli.parse_positive("0.5") == 0.5
    for bad in ("0", "-1", "x"):
        with pytest.raises(argparse.ArgumentTypeError):
            cli.parse_positive(bad)


def test_table_csv(tmp_path, capsys):
    assert cli.main(["table", "--d", "2..6", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "constants.csv").open()))
    assert [r["d"] for r in rows] == ["2", "3", "4", "5", "6"]
    assert float(rows[0]["kappa_d"]) == 5.21337
    assert float(rows[4]["delta_star"]) == 0.0494043
    rep = json.loads((tmp_path / "table.json").read_text())
    assert rep["schema_version"] == 1 and "timestamp" in rep["header"]
    assert "2,2.37340e-01,5.21337e+00" in capsys.readouterr().out


def test_constants_command(tmp_path, capsys):
    code = cli.main(["constants", "--d", "2", "--delta", "0.23734", "--b", "0.1",
                     "--out", str(tmp_path), "--format", "json"])
    assert code == 0
    assert "K_2(0.23734) = 5.21337" in capsys.readouterr().out
    rep = json.loads((tmp_path / "constants.json").read_text())
    entry = rep["results"][0]
    assert abs(entry["K_d"]["0.23734"] - 5.21337) < 1e-5
    assert entry["perturbed"][0]["b"] == 0.1
    assert not (tmp_path / "constants.csv").exists()


def test_usage_errors(capsys):
    assert cli.main(["table", "--d", "x"]) == 2
    assert cli.main(["nope"]) == 2
    assert cli.main(["constants", "--d", "1"]) == 2
    assert cli.main(["potential-check", "--potential", "{\"form\": \"yukawa\"}"]) == 2
    assert cli.main(["--help"]) == 0


def test_numeric_failure_exit(monkeypatch):
    from hresolvent.quadrature import QuadratureAccuracyError

    def boom(args):
        raise QuadratureAccuracyError("too coarse")

    monkeypatch.setitem(cli.COMMANDS, "table", boom)
    assert cli.main(["table"]) == 3


def test_hardy_command(tmp_path):
    code = cli.main(["hardy", "--d", "2", "--members", "4", "--quad", "fast", "--no-probe",
                     "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "verdicts.json").read_text())
    recs = rep["results"]["verdicts"]
    assert len(recs) == 12 and all(r["passed"] for r in recs)
    assert "display" in recs[0]


def test_resolvent_default_grid_and_determinism(tmp_path):
    args = ["resolvent", "--members", "1", "--quad", "fast", "--delta", "1", "--format", "both"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    a = json.loads((tmp_path / "a" / "verdicts.json").read_text())
    b = json.loads((tmp_path / "b" / "verdicts.json").read_text())
    assert len(a["results"][0]["meta"]["lams"]) == 12
    assert cli.body(a) == cli.body(b)
    assert (tmp_path / "a" / "verdicts.csv").read_text() == \
        (tmp_path / "b" / "verdicts.csv").read_text()


def test_identities_command_flags_written_forms(tmp_path, capsys):
    code = cli.main(["identities", "--members", "1", "--quad", "fast", "--lambda", "2+1i",
                     "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 1
    assert "(as written)" in out
    rep = json.loads((tmp_path / "identities.json").read_text())
    assert rep["results"][0]["corrected_identities_passed"] is True


def test_potential_command(tmp_path):
    code = cli.main(["potential-check", "--potential", "power+", "--members", "3",
                     "--quad", "fast", "--out", str(tmp_path)])
    assert code == 0
    res = json.loads((tmp_path / "verdicts.json").read_text())["results"][0]
    assert res["V1"]["hypothesis_met"] and res["bounds"]["b"]["upper"] == pytest.approx(0.1)


def test_clean_handles_special_values():
    assert cli._clean({"a": float("inf"), "b": (1, 2), "c": 1 + 2j}) == \
        {"a": "inf", "b": [1, 2], "c": [1.0, 2.0]}
