"""Report emission: score curves, analytics tables, and SVG charts.

Everything here is a pure function of the score files in the run directory,
so the report stage can be re-run (or run standalone) at any time and always
produces identical bytes for identical inputs: rows are explicitly ordered,
floats are written with repr (CSV) or fixed precision (SVG), and no
timestamps or environment details leak in.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .analytics import (
    AucResult,
    Curve,
    area_under_curve,
    build_curve,
    cleaning_effectiveness,
    noise_tolerance_point,
)
from .config import PAIRWISE_METRIC, RunConfig
from .corpus import VariantKey, enumerate_variants
from .task_metrics import NON_CLEANED, shift_noncleaned_baseline
from .util import atomic_write_text, read_jsonl

NO_CLEANING = "none"

_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
)


@dataclass
class TechniqueReport:
    technique: str
    cleaning_index: int
    curve: Curve
    ntp: float | None
    auc: AucResult
    ces: float | None  # None for the uncleaned series and failed computations


class ReportError(RuntimeError):
    pass


def _require_file(path: Path) -> Path:
    if not path.is_file():
        raise ReportError(f"missing score file {path}; run the pipeline first")
    return path


def _load_wer(scores_dir: Path) -> dict[str, float]:
    return {
        record["variant"]: float(record["set_wer"])
        for _, record in read_jsonl(_require_file(scores_dir / "wer.jsonl"))
    }


def _load_metric_scores(scores_dir: Path) -> dict[tuple[str, str], list[float]]:
    out = {}
    for _, record in read_jsonl(_require_file(scores_dir / "metrics.jsonl")):
        out[(record["variant"], record["metric"])] = [float(s) for s in record["scores"]]
    return out


def _load_tournaments(
    scores_dir: Path,
) -> tuple[dict[str, list[float]], dict[str, dict[str, list[float]]], list[str]]:
    """Per-variant point lists, in instance order.

    Returns (non_cleaned, cleaned_by_technique, warnings); cleaned-mode lists
    include the non-cleaned opponents' points earned inside that technique's
    tournament.
    """
    non_cleaned: dict[str, list[float]] = {}
    cleaned: dict[str, dict[str, list[float]]] = {}
    warnings: list[str] = []
    for _, record in read_jsonl(_require_file(scores_dir / "tournaments.jsonl")):
        target = (
            non_cleaned
            if record["mode"] == NON_CLEANED
            else cleaned.setdefault(record["technique"], {})
        )
        for variant, points in record["points"].items():
            target.setdefault(variant, []).append(float(points))
        for warning in record.get("warnings", []):
            warnings.append(f"instance {record['instance_id']}: {warning}")
    return non_cleaned, cleaned, warnings


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _level_names(levels: int, cleaning: int) -> list[str]:
    return [VariantKey(level=i, cleaning=cleaning).name for i in range(levels + 1)]


def build_report(config: RunConfig, scores_dir: Path) -> tuple[dict[str, list[TechniqueReport]], list[str]]:
    """Assemble per-metric, per-technique curves and analytics."""
    wer = _load_wer(scores_dir)
    metric_scores = _load_metric_scores(scores_dir)
    levels = config.noise.levels
    techniques = config.cleaning.techniques
    warnings: list[str] = []
    report: dict[str, list[TechniqueReport]] = {}

    for metric in config.metrics:
        if metric == PAIRWISE_METRIC:
            continue
        ref_scores = metric_scores[("ref_0", metric)]
        baseline_series = [
            (wer[name], metric_scores[(name, metric)]) for name in _level_names(levels, 0)
        ]
        entries = []
        for j in range(len(techniques) + 1):
            technique = NO_CLEANING if j == 0 else techniques[j - 1]
            series = [
                (wer[name], metric_scores[(name, metric)])
                for name in _level_names(levels, j)
            ]
            curve = build_curve(f"{metric}/{technique}", ref_scores, series)
            warnings.extend(curve.warnings)
            ces = None
            if j > 0:
                ces = _safe_ces(
                    _mean(ref_scores),
                    [(w, _mean(s)) for w, s in baseline_series],
                    [(w, _mean(s)) for w, s in series],
                    f"{metric}/{technique}",
                    warnings,
                )
            entries.append(
                TechniqueReport(
                    technique=technique,
                    cleaning_index=j,
                    curve=curve,
                    ntp=noise_tolerance_point(curve),
                    auc=area_under_curve(curve),
                    ces=ces,
                )
            )
        report[metric] = entries

    if PAIRWISE_METRIC in config.metrics:
        report[PAIRWISE_METRIC] = _build_pairwise(config, scores_dir, wer, warnings)
    return report, warnings


def _build_pairwise(
    config: RunConfig, scores_dir: Path, wer: dict[str, float], warnings: list[str]
) -> list[TechniqueReport]:
    non_cleaned, cleaned, tournament_warnings = _load_tournaments(scores_dir)
    warnings.extend(tournament_warnings)
    levels = config.noise.levels
    entries = []

    if non_cleaned:
        series = [(wer[name], non_cleaned[name]) for name in _level_names(levels, 0)]
        curve = build_curve(f"{PAIRWISE_METRIC}/{NO_CLEANING}", non_cleaned["ref_0"], series)
        warnings.extend(curve.warnings)
        entries.append(
            TechniqueReport(
                technique=NO_CLEANING,
                cleaning_index=0,
                curve=curve,
                ntp=noise_tolerance_point(curve),
                auc=area_under_curve(curve),
                ces=None,
            )
        )

    for j, technique in enumerate(config.cleaning.techniques, start=1):
        if technique not in cleaned:
            continue
        points = cleaned[technique]
        opponents = {name: points[name] for name in ["ref_0"] + _level_names(levels, 0)}
        if config.tournament.shift_noncleaned_baseline:
            # cleaned candidates face one extra opponent, so the non-cleaned
            # side is renormalized once before the series are compared
            opponents = shift_noncleaned_baseline(opponents)
        ref_scores = opponents["ref_0"]
        cleaned_series = [(wer[name], points[name]) for name in _level_names(levels, j)]
        baseline_series = [(wer[name], opponents[name]) for name in _level_names(levels, 0)]
        curve = build_curve(f"{PAIRWISE_METRIC}/{technique}", ref_scores, cleaned_series)
        warnings.extend(curve.warnings)
        ces = _safe_ces(
            _mean(ref_scores),
            [(w, _mean(s)) for w, s in baseline_series],
            [(w, _mean(s)) for w, s in cleaned_series],
            f"{PAIRWISE_METRIC}/{technique}",
            warnings,
        )
        entries.append(
            TechniqueReport(
                technique=technique,
                cleaning_index=j,
                curve=curve,
                ntp=noise_tolerance_point(curve),
                auc=area_under_curve(curve),
                ces=ces,
            )
        )
    return entries


def _safe_ces(reference, baseline, cleaned, label: str, warnings: list[str]) -> float | None:
    try:
        return cleaning_effectiveness(reference, baseline, cleaned)
    except ValueError as exc:
        warnings.append(f"no cleaning effectiveness for {label}: {exc}")
        return None


# --- file emission ------------------------------------------------------


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_report(config: RunConfig, paths) -> list[Path]:
    """Emit curves.csv, summary_metrics.csv, ces.csv, summary.json and one
    chart per metric; returns every file written."""
    report, warnings = build_report(config, paths.scores_dir)
    wer = _load_wer(paths.scores_dir)
    metric_scores = _load_metric_scores(paths.scores_dir)
    report_dir = paths.report_dir
    report_dir.mkdir(parents=True, exist_ok=True)
    produced = []

    rows = []
    for metric in report:
        for entry in report[metric]:
            for p in entry.curve.points:
                rows.append(
                    [
                        config.run_id,
                        metric,
                        entry.technique,
                        entry.cleaning_index,
                        repr(p.wer),
                        repr(p.score),
                        repr(p.moe),
                        repr(p.lower),
                        repr(p.upper),
                        p.n,
                    ]
                )
    curves_csv = report_dir / "curves.csv"
    _write_csv(
        curves_csv,
        ["run_id", "metric", "technique", "cleaning_index",
         "wer", "score", "moe", "lower", "upper", "n"],
        rows,
    )
    produced.append(curves_csv)

    rows = []
    for key in enumerate_variants(config.noise.levels, len(config.cleaning.techniques)):
        technique = (
            NO_CLEANING
            if key.cleaning == 0
            else config.cleaning.techniques[key.cleaning - 1]
        )
        for metric in config.metrics:
            if metric == PAIRWISE_METRIC:
                continue
            scores = metric_scores[(key.name, metric)]
            rows.append(
                [
                    config.run_id,
                    key.name,
                    "ref" if key.is_ref else key.level,
                    key.cleaning,
                    technique,
                    metric,
                    len(scores),
                    repr(_mean(scores)),
                    repr(wer[key.name]),
                ]
            )
    summary_csv = report_dir / "summary_metrics.csv"
    _write_csv(
        summary_csv,
        ["run_id", "variant", "level", "cleaning_index", "technique",
         "metric", "n", "mean_score", "set_wer"],
        rows,
    )
    produced.append(summary_csv)

    rows = []
    for metric in report:
        ranked = sorted(
            (e for e in report[metric] if e.ces is not None),
            key=lambda e: (-e.ces, e.cleaning_index),
        )
        for rank, entry in enumerate(ranked, start=1):
            rows.append(
                [config.run_id, metric, entry.technique, entry.cleaning_index,
                 repr(entry.ces), rank]
            )
    ces_csv = report_dir / "ces.csv"
    _write_csv(
        ces_csv,
        ["run_id", "metric", "technique", "cleaning_index", "ces", "rank"],
        rows,
    )
    produced.append(ces_csv)

    summary = {
        "run_id": config.run_id,
        "config_hash": config.config_hash(),
        "task": config.dataset.task,
        "backend": config.noise.backend,
        "levels": config.noise.levels,
        "techniques": list(config.cleaning.techniques),
        "set_wer": {name: wer[name] for name in sorted(wer)},
        "analytics": {
            metric: {
                entry.technique: {
                    "cleaning_index": entry.cleaning_index,
                    "ntp": entry.ntp,
                    "auc": entry.auc.value,
                    "auc_moe": entry.auc.moe,
                    "ces": entry.ces,
                }
                for entry in report[metric]
            }
            for metric in report
        },
        "warnings": warnings,
    }
    summary_json = report_dir / "summary.json"
    atomic_write_text(summary_json, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    produced.append(summary_json)

    charts_dir = report_dir / "charts"
    charts_dir.mkdir(parents=True, exist_ok=True)
    for metric in report:
        chart = charts_dir / f"{metric}.svg"
        atomic_write_text(chart, render_chart(metric, report[metric]))
        produced.append(chart)
    return produced


# --- SVG charts ---------------------------------------------------------

_W, _H = 880, 520
_ML, _MR, _MT, _MB = 70, 250, 44, 60


def _fmt(v: float) -> str:
    return format(v, ".3g")


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def render_chart(metric: str, entries: Sequence[TechniqueReport]) -> str:
    """One self-contained SVG: score-vs-WER lines with confidence bands,
    tolerance-point markers, and per-technique area labels."""
    xs = [p.wer for e in entries for p in e.curve.points]
    los = [p.lower for e in entries for p in e.curve.points]
    his = [p.upper for e in entries for p in e.curve.points]
    x_max = max(xs) if max(xs) > 0 else 1.0
    x_max *= 1.05
    y_min, y_max = min(los), max(his)
    if y_max - y_min < 1e-12:
        y_min, y_max = y_min - 0.5, y_max + 0.5
    pad = 0.05 * (y_max - y_min)
    y_min, y_max = y_min - pad, y_max + pad

    def sx(v: float) -> float:
        return _ML + (v / x_max) * (_W - _ML - _MR)

    def sy(v: float) -> float:
        return _H - _MB - ((v - y_min) / (y_max - y_min)) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_ML}" y="24" font-size="16" fill="#222">'
        f"{_escape(metric)} vs word error rate</text>",
    ]

    for i in range(6):  # axis grid and tick labels
        xv = x_max * i / 5
        yv = y_min + (y_max - y_min) * i / 5
        gx, gy = sx(xv), sy(yv)
        parts.append(
            f'<line x1="{gx:.2f}" y1="{sy(y_min):.2f}" x2="{gx:.2f}" '
            f'y2="{sy(y_max):.2f}" stroke="#ddd" stroke-width="1"/>'
        )
        parts.append(
            f'<line x1="{sx(0):.2f}" y1="{gy:.2f}" x2="{sx(x_max):.2f}" '
            f'y2="{gy:.2f}" stroke="#ddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{gx:.2f}" y="{_H - _MB + 18}" font-size="11" fill="#444" '
            f'text-anchor="middle">{_fmt(xv)}</text>'
        )
        parts.append(
            f'<text x="{_ML - 8}" y="{gy + 4:.2f}" font-size="11" fill="#444" '
            f'text-anchor="end">{_fmt(yv)}</text>'
        )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.2f}" y="{_H - 16}" font-size="13" '
        f'fill="#222" text-anchor="middle">word error rate</text>'
    )
    parts.append(
        f'<text x="20" y="{(_MT + _H - _MB) / 2:.2f}" font-size="13" fill="#222" '
        f'text-anchor="middle" transform="rotate(-90 20 {(_MT + _H - _MB) / 2:.2f})">'
        "score</text>"
    )

    legend_y = _MT + 10
    for idx, entry in enumerate(entries):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = entry.curve.points
        band = " ".join(f"{sx(p.wer):.2f},{sy(p.upper):.2f}" for p in pts)
        band += " " + " ".join(f"{sx(p.wer):.2f},{sy(p.lower):.2f}" for p in reversed(pts))
        parts.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.12"/>')
        line = " ".join(f"{sx(p.wer):.2f},{sy(p.score):.2f}" for p in pts)
        parts.append(
            f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for p in pts:
            parts.append(
                f'<circle cx="{sx(p.wer):.2f}" cy="{sy(p.score):.2f}" r="3.2" '
                f'fill="{color}"/>'
            )
        ntp_label = "-"
        if entry.ntp is not None:
            threshold = pts[0].lower
            nx, ny = sx(entry.ntp), sy(threshold)
            parts.append(
                f'<line x1="{nx:.2f}" y1="{sy(y_min):.2f}" x2="{nx:.2f}" '
                f'y2="{ny:.2f}" stroke="{color}" stroke-width="1" '
                'stroke-dasharray="4 3"/>'
            )
            parts.append(
                f'<path d="M {nx:.2f} {ny - 5:.2f} L {nx + 5:.2f} {ny:.2f} '
                f'L {nx:.2f} {ny + 5:.2f} L {nx - 5:.2f} {ny:.2f} Z" fill="{color}"/>'
            )
            ntp_label = _fmt(entry.ntp)
        lx = _W - _MR + 16
        parts.append(
            f'<rect x="{lx}" y="{legend_y - 9}" width="18" height="4" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{lx + 24}" y="{legend_y - 2}" font-size="12" fill="#222">'
            f"{_escape(entry.technique)}</text>"
        )
        parts.append(
            f'<text x="{lx + 24}" y="{legend_y + 12}" font-size="10" fill="#555">'
            f"auc {_fmt(entry.auc.value)}&#177;{_fmt(entry.auc.moe)}, "
            f"ntp {ntp_label}</text>"
        )
        legend_y += 34

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
