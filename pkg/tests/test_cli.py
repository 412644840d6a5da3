import io
import json

import pytest

from app.cli import EXIT_ERROR, EXIT_FALSE, EXIT_TRUE, main
from app.services.hybrid import SpaceModel, default_model


def test_solve_true_and_false(fixture_path, capsys):
    assert main(["solve", "--graph", str(fixture_path("k4"))]) == EXIT_TRUE
    assert "verdict: true" in capsys.readouterr().out
    assert main(["solve", "--graph", str(fixture_path("petersen"))]) == EXIT_FALSE
    assert "verdict: false" in capsys.readouterr().out


def test_solve_json_has_sorted_keys_and_schema_version(fixture_path, capsys):
    code = main(["solve", "--graph", str(fixture_path("q3")), "--mode", "nonrecursive", "--json", "--no-timings"])
    assert code == EXIT_TRUE
    doc = json.loads(capsys.readouterr().out)
    assert list(doc) == sorted(doc)
    assert doc["schema_version"] == "1.0"
    assert doc["mode"] == "nonrecursive"
    assert "timings" not in doc


def test_solve_reads_stdin(fixture_path, capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO(fixture_path("k33").read_text()))
    assert main(["solve", "--graph", "-", "--oracle-check"]) == EXIT_TRUE
    assert "oracle: true" in capsys.readouterr().out


def test_solve_errors_exit_two(fixture_path, tmp_path, capsys):
    assert main(["solve", "--graph", str(tmp_path / "missing.g")]) == EXIT_ERROR
    bad = tmp_path / "loop.g"
    bad.write_text("p 2 1\ne 2 2\n")
    assert main(["solve", "--graph", str(bad)]) == EXIT_ERROR
    assert main(["solve", "--graph", str(fixture_path("k4")), "--mode", "hybrid"]) == EXIT_ERROR
    assert "error:" in capsys.readouterr().err


def test_hybrid_solve_reports_budget(fixture_path, capsys):
    assert main(["solve", "--graph", str(fixture_path("k33")), "--mode", "hybrid", "--c", "0.5"]) == EXIT_TRUE
    assert "budget=3" in capsys.readouterr().out


def test_gen_writes_files(tmp_path):
    out = tmp_path / "corpus"
    code = main(["gen", "--n", "6", "--count", "2", "--triangle-free", "--unique", "--out", str(out)])
    assert code == EXIT_TRUE
    assert [p.name for p in out.glob("*.g")] == ["cubic_n6_s0_0000.g"]


def test_gen_to_stdout(capsys):
    assert main(["gen", "--n", "4"]) == EXIT_TRUE
    assert capsys.readouterr().out.startswith("p 4 6\n")
    assert main(["gen", "--n", "4", "--triangle-free"]) == EXIT_FALSE


def test_contract(fixture_path, capsys):
    assert main(["contract", "--graph", str(fixture_path("k4"))]) == EXIT_TRUE
    assert capsys.readouterr().out == "p 2 3\ne 1 2\ne 1 2\ne 1 2\n"


def test_analyze_writes_table_and_model(tmp_path):
    out = tmp_path / "analysis.json"
    model_path = tmp_path / "model.json"
    code = main([
        "analyze", "--c-grid", "0.1,0.2", "--ns", "64",
        "--out", str(out), "--save-model", str(model_path),
    ])
    assert code == EXIT_TRUE
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 2
    assert doc["calibration"] is None
    assert SpaceModel.load(model_path) == default_model()


def test_analyze_rejects_bad_grid(capsys):
    assert main(["analyze", "--c-grid", "1:0:4"]) == EXIT_ERROR


def test_trace(fixture_path, capsys):
    assert main(["trace", "--graph", str(fixture_path("k33"))]) == EXIT_TRUE
    assert json.loads(capsys.readouterr().out)["schedule"] == []
    assert main(["trace", "--graph", str(fixture_path("k33")), "--emit-schedule"]) == EXIT_TRUE
    doc = json.loads(capsys.readouterr().out)
    assert doc["r"] == 27
    assert doc["schedule"]


def test_verify_hybrid_suite(capsys):
    assert main(["verify", "--suite", "hybrid"]) == EXIT_TRUE
    report = json.loads(capsys.readouterr().out)
    assert report["suite"] == "hybrid"
    assert all(c["passed"] for c in report["checks"])


def test_unknown_suite_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["verify", "--suite", "nope"])
    assert info.value.code == 2
