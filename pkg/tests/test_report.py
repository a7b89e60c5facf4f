import numpy as np
import pytest

from sfca.decode import decode_times, ideal_score_trace
from sfca.evaluation import Cell, EvaluationReport, Prediction, ProblemSpec
from sfca.report import (
    confidence_halfwidth,
    decode_audit_figure,
    format_text_table,
    read_report_csv,
    scatter_figure,
    write_all,
    write_report_csv,
)
from sfca.trajectory import ActivityOutcome
from sfca.transform import threshold_labels


def _report():
    probs = [ProblemSpec("internet", "sleep", "start")]
    methods = [("ols", "REG"), ("c-tree(bg)", "SFCA-T")]
    cells, preds = {}, {}
    for m, v in (("ols", 20.0), ("c-tree(bg)", 10.0)):
        for t in (0, 500_000):
            k = (m, probs[0].label, t)
            cells[k] = Cell(2, v, 0)
            preds[k] = [Prediction("A", 2010, 1390.0, 1380.0, 25), Prediction("B", 2010, 5.0, 1430.0, 100)]
    return EvaluationReport(methods, probs, (0, 500_000), cells, preds)


def test_halfwidth_formula():
    assert confidence_halfwidth([1, 4, 100]) == pytest.approx([117.6, 58.8, 11.76])
    with pytest.raises(ValueError):
        confidence_halfwidth([0])


def test_csv_roundtrip(tmp_path):
    write_report_csv(_report(), tmp_path / "r.csv")
    rows = read_report_csv(tmp_path / "r.csv")
    assert len(rows) == 4
    assert rows[2]["method"] == "c-tree(bg)" and rows[2]["gm_min"] == "10.0000"


def test_text_markers():
    txt = format_text_table(_report())
    assert "20.00^" in txt and "10.00*+" in txt


def test_figures_are_byte_deterministic(tmp_path):
    r = _report()
    for fmt in ("svg", "png"):
        a = scatter_figure(r, "ols", "internet", tmp_path / f"a.{fmt}")
        b = scatter_figure(r, "ols", "internet", tmp_path / f"b.{fmt}")
        assert a.read_bytes() == b.read_bytes()


def test_audit_figure(tmp_path):
    labels = threshold_labels(ActivityOutcome("sleep", 1335, 407), drop=0)
    _, audit = decode_times(ideal_score_trace(labels), audit=True)
    p = decode_audit_figure(audit, tmp_path / "d.svg", truth=(1335, 407))
    assert p.stat().st_size > 1000


def test_write_all_lists_files(tmp_path):
    files = write_all(_report(), tmp_path, formats=("svg",))
    names = {f.name for f in files}
    assert {"report.csv", "report.txt", "scatter.csv", "scatter_ols_internet.svg"} <= names
    assert all(f.exists() for f in files)


def test_exclusions_and_failures_are_listed():
    r = _report()
    r.cells[("c-tree(bg)", "internet/sleep:start", 0)] = Cell(2, 10.0, 1)
    r.cells[("ols", "internet/sleep:start", 500_000)] = Cell(0, None, 0, "ConvergenceError: boom")
    txt = format_text_table(r)
    assert "1 excluded (no transition found)" in txt
    assert "ConvergenceError: boom" in txt and " fail" in txt
