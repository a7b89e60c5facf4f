"""Benchmark tables, scatter data and figures.

Figures are drawn with matplotlib's Agg backend. SVG output uses a fixed
hash salt and no date stamp, and PNG output carries no software tag, so
re-running with the same inputs rewrites identical bytes.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import EvaluationReport  # noqa: E402
from .grid import DOW_NAMES, MINUTES_PER_DAY  # noqa: E402

CSV_HEADER = ["method", "type", "problem", "filter", "n", "rmse_min", "gm_min"]
SCATTER_HEADER = [
    "method", "problem", "filter", "city_id", "year", "observed_min", "predicted_min",
    "respondents", "ci_low_min", "ci_high_min",
]
MARK_BEST_REGRESSION = "^"
MARK_BEST_OVERALL = "*"
MARK_SFCA_BEATS_REGRESSION = "+"


def _fmt(v, digits=4) -> str:
    return "" if v is None else f"{v:.{digits}f}"


def write_report_csv(report: EvaluationReport, path) -> None:
    """One row per (method, problem, filter); the GM repeats on each row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in report.problems:
            for m, typ in report.methods:
                gm = report.gm(m, p.label)
                for t in report.thresholds:
                    c = report.cells[(m, p.label, t)]
                    w.writerow([m, typ, p.label, int(t), c.n, _fmt(c.rmse), _fmt(gm)])


def read_report_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and list(rows[0]) != CSV_HEADER:
        raise ValueError(f"{path}: unexpected header")
    return rows


def _markers(report: EvaluationReport, method: str, problem: str) -> str:
    out = ""
    if report.best_regression(problem) == method:
        out += MARK_BEST_REGRESSION
    if report.best_overall(problem) == method:
        out += MARK_BEST_OVERALL
    if method in report.sfca_beating_regression(problem):
        out += MARK_SFCA_BEATS_REGRESSION
    return out


def format_text_table(report: EvaluationReport) -> str:
    """Aligned GM(RMSE) tables in minutes, one block per data source."""
    lines = []
    sources = []
    for p in report.problems:
        if p.source not in sources:
            sources.append(p.source)
    for source in sources:
        probs = [p for p in report.problems if p.source == source]
        head = ["Type", "Method"] + [f"{p.activity}:{p.target}" for p in probs]
        body = []
        for m, typ in report.methods:
            row = [typ, m]
            for p in probs:
                gm = report.gm(m, p.label)
                row.append("fail" if gm is None else f"{gm:.2f}{_markers(report, m, p.label)}")
            body.append(row)
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        title = f"GM(RMSE) (min), {source} data"
        lines.append(title)
        lines.append("=" * len(title))

        def fmt(r):
            return "  ".join(
                (c.ljust(w) if i < 2 else c.rjust(w)) for i, (c, w) in enumerate(zip(r, widths))
            ).rstrip()

        lines.append(fmt(head))
        lines.append(fmt(["-" * w for w in widths]))
        lines.extend(fmt(r) for r in body)
        counts = []
        for t in report.thresholds:
            ns = {report.cells[(m, p.label, t)].n for m, _ in report.methods for p in probs}
            ns.discard(0)
            counts.append(f"> {int(t):,}: n={max(ns) if ns else 0}")
        lines.append("city-years per filter: " + "; ".join(counts))
        lines.append("")
    lines.append(
        f"{MARK_BEST_REGRESSION} best regression method; {MARK_BEST_OVERALL} best overall; "
        f"{MARK_SFCA_BEATS_REGRESSION} classification method beating the best regression method"
    )
    excl = []
    for (m, p, t), c in sorted(report.cells.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        if c.excluded and p.endswith(":start"):
            excl.append(f"  {m} {p.rsplit(':', 1)[0]} > {int(t):,}: {c.excluded} excluded (no transition found)")
    if excl:
        lines.append("decode exclusions:")
        lines.extend(excl)
    fails = report.failures
    if fails:
        lines.append("failed cells:")
        lines.extend(f"  {m} {p} > {int(t):,}: {err}" for (m, p, t), err in fails)
    lines.append(f"LOOCV folds audited: {len(report.folds)}; training rows from held-out city: {report.leaked_rows}")
    return "\n".join(lines) + "\n"


def confidence_halfwidth(respondents, sd_min: float = 60.0) -> np.ndarray:
    """95% normal interval half-width of a survey mean, ``1.96 sd / sqrt(n)``."""
    n = np.asarray(respondents, dtype=float)
    if np.any(n < 1):
        raise ValueError("respondent counts must be >= 1")
    return 1.96 * sd_min / np.sqrt(n)


def scatter_rows(report: EvaluationReport, threshold=None, sd_min: float = 60.0) -> list[list]:
    threshold = report.thresholds[0] if threshold is None else threshold
    rows = []
    for p in report.problems:
        for m, _ in report.methods:
            preds = report.predictions.get((m, p.label, threshold), [])
            hw = confidence_halfwidth([q.respondents for q in preds], sd_min) if preds else []
            for q, h in zip(preds, hw):
                rows.append([
                    m, p.label, int(threshold), q.city_id, q.year, _fmt(q.observed),
                    _fmt(q.predicted), q.respondents, _fmt(q.observed - h), _fmt(q.observed + h),
                ])
    return rows


def write_scatter_csv(report: EvaluationReport, path, threshold=None, sd_min: float = 60.0) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCATTER_HEADER)
        w.writerows(scatter_rows(report, threshold, sd_min))


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".svg":
        with matplotlib.rc_context({"svg.hashsalt": "sfca", "svg.fonttype": "path"}):
            fig.savefig(path, format="svg", metadata={"Date": None})
    else:
        fig.savefig(path, format="png", dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def _clock(v):
    return (np.asarray(v, dtype=float) % MINUTES_PER_DAY) / 60.0


def scatter_figure(report: EvaluationReport, method: str, source: str, path, threshold=None,
                   sd_min: float = 60.0) -> Path:
    """Predicted against observed times for one method and source.

    Grey bars are the observed values' 95% intervals. Clock times are shown in
    hours; times before noon are drawn past 24 h for sleep so the cloud does
    not split at midnight.
    """
    threshold = report.thresholds[0] if threshold is None else threshold
    probs = [p for p in report.problems if p.source == source]
    ncol = 3
    nrow = max(1, math.ceil(len(probs) / ncol))
    fig, axes = plt.subplots(nrow, ncol, figsize=(3.4 * ncol, 3.2 * nrow), squeeze=False)
    for ax in axes.ravel()[len(probs):]:
        ax.set_visible(False)
    for ax, p in zip(axes.ravel(), probs):
        preds = report.predictions.get((method, p.label, threshold), [])
        if not preds:
            ax.set_title(f"{p.activity}:{p.target} (no data)", fontsize=9)
            continue
        obs = np.array([q.observed for q in preds])
        pred = np.array([q.predicted for q in preds])
        hw = confidence_halfwidth([q.respondents for q in preds], sd_min)
        if p.target == "duration":
            xo, xp, scale = obs / 60.0, pred / 60.0, 60.0
        else:
            xo, xp, scale = _clock(obs), _clock(pred), 60.0
            if p.activity == "sleep" and p.target == "start":
                xo = np.where(xo < 12, xo + 24, xo)
                xp = np.where(xp < 12, xp + 24, xp)
        ax.errorbar(xo, xp, xerr=hw / scale, fmt="none", ecolor="0.75", elinewidth=1, zorder=1)
        ax.scatter(xo, xp, s=10, color="k", zorder=2)
        lo = min(xo.min() - hw.max() / scale, xp.min())
        hi = max(xo.max() + hw.max() / scale, xp.max())
        ax.plot([lo, hi], [lo, hi], color="tab:red", lw=0.8)
        ax.set_xlim(lo, hi)
        ax.set_ylim(lo, hi)
        ax.set_xlabel("observed (h)", fontsize=8)
        ax.set_ylabel("predicted (h)", fontsize=8)
        c = report.cells.get((method, p.label, threshold))
        r = "" if c is None or c.rmse is None else f", rmse {c.rmse:.1f} min"
        ax.set_title(f"{p.activity}:{p.target}{r}", fontsize=9)
        ax.tick_params(labelsize=7)
    fig.suptitle(f"{method}, {source} data, population > {int(threshold):,}", fontsize=10)
    fig.tight_layout()
    return _save(fig, Path(path))


def decode_audit_figure(audit, path, truth: tuple[float, float] | None = None, title: str = "") -> Path:
    """Score trace, its smooth, the differences and the de-noised differences."""
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    h = audit.segment_minutes / 60.0
    a1.step(h, audit.raw, where="mid", color="0.6", label="scores")
    a1.plot(h, audit.smoothed, color="k", label="smoothed")
    a1.set_ylabel("score")
    a1.legend(fontsize=8, loc="best")
    hb = audit.boundary_minutes / 60.0
    a2.plot(hb, audit.difference, color="0.6", label="difference")
    a2.plot(hb, audit.denoised, color="k", label="de-noised")
    for m, lab in ((audit.start_min, "start"), (audit.stop_min, "stop")):
        for ax in (a1, a2):
            ax.axvline(m / 60.0, color="tab:blue", lw=0.8)
        a2.annotate(lab, (m / 60.0, 0), fontsize=8, color="tab:blue")
    if truth is not None:
        lo = h[0] - 0.5
        for t in truth:
            x = (t / 60.0 - lo) % 24 + lo
            for ax in (a1, a2):
                ax.axvline(x, color="tab:red", lw=0.8, ls="--")
    a2.set_xlabel("hour (rotated day)")
    a2.set_ylabel("difference")
    a2.legend(fontsize=8, loc="best")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    return _save(fig, Path(path))


def week_figure(weeks, path, days: Sequence[int] = (1, 7), title: str = "") -> Path:
    """Registered daily traces of several city-years on chosen weekdays."""
    fig, axes = plt.subplots(1, len(days), figsize=(4 * len(days), 3.2), squeeze=False, sharey=True)
    for ax, d in zip(axes[0], days):
        for key in sorted(weeks):
            tr = weeks[key].traces[d - 1]
            x = (np.arange(tr.size) + 0.5) * 24 / tr.size
            ax.plot(x, tr, lw=0.7, alpha=0.7)
        ax.set_title(DOW_NAMES[d - 1], fontsize=9)
        ax.set_xlabel("hour")
        ax.set_xlim(0, 24)
    axes[0][0].set_ylabel("registered level")
    if title:
        fig.suptitle(title, fontsize=10)
    fig.tight_layout()
    return _save(fig, Path(path))


def write_all(report: EvaluationReport, out_dir, formats=("svg",), sd_min: float = 60.0,
              scatter_threshold=None, figure_methods: Sequence[str] | None = None) -> list[Path]:
    """Emit CSV, text table, scatter CSV and one scatter figure per method and source."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    write_report_csv(report, out / "report.csv")
    written.append(out / "report.csv")
    (out / "report.txt").write_text(format_text_table(report), encoding="utf-8")
    written.append(out / "report.txt")
    write_scatter_csv(report, out / "scatter.csv", scatter_threshold, sd_min)
    written.append(out / "scatter.csv")
    methods = figure_methods if figure_methods is not None else [m for m, _ in report.methods]
    sources = sorted({p.source for p in report.problems})
    for m in methods:
        slug = m.replace("(", "_").replace(")", "").replace(" ", "")
        for s in sources:
            for fmt in formats:
                written.append(scatter_figure(
                    report, m, s, out / "figures" / f"scatter_{slug}_{s}.{fmt}", scatter_threshold, sd_min
                ))
    return written
