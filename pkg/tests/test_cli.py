import json

import pytest

from sfca.cli import main
from sfca.io import read_decode_audit, read_outcomes


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    assert main(["synth", "--cities", "3", "--days", "7", "--seed", "2", "--out", str(d)]) == 0
    return d


def test_synth_writes_per_city_traces(data_dir):
    assert sorted(p.name for p in (data_dir / "traces").iterdir()) == ["C001.csv", "C002.csv", "C003.csv"]
    outcomes = read_outcomes(data_dir / "outcomes.csv")
    assert len(outcomes) == 3 and all(set(v) == {"sleep", "work"} for v in outcomes.values())
    for name in ("demand.csv", "static.csv", "truth.csv"):
        assert (data_dir / name).is_file()


def test_preprocess_and_features(data_dir, tmp_path, capsys):
    assert main(["preprocess", "--data", str(data_dir), "--source", "electricity",
                 "--out", str(tmp_path / "w.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["city_years"] == 3
    assert main(["features", "--data", str(data_dir), "--source", "internet", "--activity", "work",
                 "--out", str(tmp_path / "f.csv")]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["rows"] == 3 * 94 and res["columns"] == 46


def test_train_and_decode(data_dir, tmp_path, capsys):
    assert main(["train", "--data", str(data_dir), "--source", "internet", "--activity", "sleep",
                 "--method", "ridge", "--target", "start", "--out", str(tmp_path / "m.json")]) == 0
    assert json.loads((tmp_path / "m.json").read_text())["format"] == "sfca-model"
    capsys.readouterr()
    out = tmp_path / "audit.csv"
    assert main(["decode", "--data", str(data_dir), "--source", "internet", "--activity", "work",
                 "--city", "C002", "--method", "c-tree(bg)", "--out", str(out),
                 "--figure", str(tmp_path / "a.svg")]) == 0
    assert len(read_decode_audit(out)) == 5
    assert (tmp_path / "a.svg").read_text().startswith("<?xml")


def test_usage_errors_exit_2(data_dir, tmp_path, capsys):
    assert main(["train", "--data", str(data_dir), "--source", "internet", "--activity", "sleep",
                 "--method", "ols"]) == 2
    assert main(["decode", "--data", str(data_dir), "--source", "internet", "--activity", "work",
                 "--city", "C002", "--method", "ols"]) == 2
    cfg = tmp_path / "bad.toml"
    cfg.write_text("nonsense.key = 1\n")
    assert main(["synth", "--config", str(cfg)]) == 2
    with pytest.raises(SystemExit) as e:
        main(["evaluate", "--no-such-flag"])
    assert e.value.code == 2


def test_runtime_error_is_json_on_stderr(tmp_path, capsys):
    assert main(["preprocess", "--data", str(tmp_path / "nowhere"), "--source", "internet"]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["command"] == "preprocess" and err["type"]


def test_evaluate_then_report(data_dir, tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('evaluate.thresholds = [0]\nevaluate.problems = ["internet/work:start", '
                   '"internet/work:stop", "internet/work:duration"]\nmodel.c-tree-bag.n_trees = 5\n'
                   'report.formats = ["svg", "png"]\n')
    out = tmp_path / "out"
    assert main(["evaluate", "--config", str(cfg), "--data", str(data_dir), "--methods", "ols,c-tree(bg)",
                 "--out", str(out)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["cells"] == 6 and res["leaked_rows"] == 0
    assert main(["report", "--config", str(cfg), "--out", str(out)]) == 0
    figs = sorted(p.name for p in (out / "figures").iterdir())
    assert "scatter_c-tree_bg_internet.svg" in figs and "scatter_ols_internet.png" in figs
    assert "LOOCV folds audited" in (out / "report.txt").read_text()


def test_synth_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--cities", "3", "--days", "7", "--seed", "8", "--out", str(tmp_path / name)]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    assert len(files) == 7
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
