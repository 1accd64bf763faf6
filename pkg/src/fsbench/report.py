"""Report generation from a record store.

Emits machine-readable CSV tables (curve means, Z-scores, rank
comparisons) and SVG charts.  Every output is a pure function of the
store contents, so regenerating reports from the same store produces
byte-identical files.
"""

from __future__ import annotations

import dataclasses
import re
from pathlib import Path

import numpy as np

from .harness import METRICS, EvalRecord, RuntimeRecord, load_baseline, load_records
from .stats import ComparisonReport, MetricCurve, cd_layout, fsdem, zscore
from . import svg

__all__ = [
    "AnalysisResult",
    "mean_curves",
    "fsdem_rows",
    "zscore_rows",
    "cd_reports",
    "method_summary",
    "write_table",
    "analyze",
    "make_plots",
    "format_cell",
]


@dataclasses.dataclass
class AnalysisResult:
    paths: list[Path]
    warnings: list[str]


def _successes(records) -> list[EvalRecord]:
    return [r for r in records if r.value is not None]


def mean_curves(records) -> dict[tuple[str, str, str], tuple[np.ndarray, np.ndarray]]:
    """Repetition-averaged metric curve per (dataset, method, metric).

    Returns k positions (ascending) and mean values; failed cells are
    excluded before averaging.
    """
    grouped: dict[tuple[str, str, str], dict[int, list[float]]] = {}
    for r in _successes(records):
        cell = grouped.setdefault((r.dataset, r.method, r.metric), {})
        cell.setdefault(r.k, []).append(r.value)
    out = {}
    for key in sorted(grouped):
        ks = sorted(grouped[key])
        means = [float(np.mean(grouped[key][k])) for k in ks]
        out[key] = (np.array(ks, dtype=np.float64), np.array(means))
    return out


def _per_rep_curves(records) -> dict[tuple[str, str, str], dict[int, dict[int, float]]]:
    grouped: dict[tuple[str, str, str], dict[int, dict[int, float]]] = {}
    for r in _successes(records):
        cell = grouped.setdefault((r.dataset, r.method, r.metric), {})
        cell.setdefault(r.repetition, {})[r.k] = r.value
    return grouped


def fsdem_rows(records) -> list[dict]:
    """Curve-mean table: one row per (dataset, method, metric).

    ``fsdem`` is the trapezoid mean of the repetition-averaged curve;
    ``fsdem_mean_of_reps`` averages each repetition's own curve mean
    (identical for single-repetition methods).  Cells with fewer than two
    distinct k values yield None.
    """
    curves = mean_curves(records)
    reps = _per_rep_curves(records)
    rows = []
    for key in sorted(curves):
        dataset, method, metric = key
        ks, means = curves[key]
        value = fsdem(MetricCurve(ks, means)) if ks.shape[0] >= 2 else None
        per_rep = []
        for rep in sorted(reps[key]):
            cells = reps[key][rep]
            rks = sorted(cells)
            if len(rks) >= 2:
                per_rep.append(
                    fsdem(MetricCurve(np.array(rks, dtype=np.float64),
                                      np.array([cells[k] for k in rks])))
                )
        rows.append(
            {
                "dataset": dataset,
                "method": method,
                "metric": metric,
                "fsdem": value,
                "fsdem_mean_of_reps": float(np.mean(per_rep)) if per_rep else None,
            }
        )
    return rows


def zscore_rows(records, baselines) -> tuple[list[dict], list[str]]:
    """Z-score table rows plus warnings for datasets without baseline stats.

    A method's value at k is its repetition mean, so the random baseline
    rows are exactly zero.
    """
    curves = mean_curves(records)
    rows = []
    warnings = []
    missing = set()
    for (dataset, method, metric), (ks, means) in sorted(curves.items()):
        stats = baselines.get(dataset, {}).get(metric)
        if stats is None:
            missing.add(dataset)
            continue
        for k, value in zip(ks, means):
            try:
                z = zscore(float(value), stats, float(k))
            except ValueError:
                continue  # k outside the baseline grid (partial failures)
            rows.append(
                {
                    "dataset": dataset,
                    "method": method,
                    "metric": metric,
                    "k": int(k),
                    "value": float(value),
                    "zscore": z,
                }
            )
    for dataset in sorted(missing):
        warnings.append(f"no random-baseline stats for dataset {dataset!r}; Z rows skipped")
    return rows, warnings


def cd_reports(records, alpha: float = 0.05) -> tuple[dict[str, ComparisonReport], list[str]]:
    """Rank-comparison inputs per metric, from the curve-mean table.

    Metrics lacking two methods on two common datasets are skipped with a
    warning instead of failing.
    """
    rows = fsdem_rows(records)
    by_metric: dict[str, dict[tuple[str, str], float]] = {}
    for row in rows:
        if row["fsdem"] is None:
            continue
        by_metric.setdefault(row["metric"], {})[(row["method"], row["dataset"])] = row["fsdem"]
    reports = {}
    warnings = []
    for metric in METRICS:
        cells = by_metric.get(metric, {})
        methods = sorted({m for m, _ in cells})
        datasets = sorted({d for _, d in cells})
        if len(methods) < 2 or len(datasets) < 2:
            warnings.append(
                f"{metric}: need >= 2 methods on >= 2 datasets for rank comparison; skipped"
            )
            continue
        matrix = np.full((len(methods), len(datasets)), np.nan)
        for i, m in enumerate(methods):
            for j, d in enumerate(datasets):
                if (m, d) in cells:
                    matrix[i, j] = cells[(m, d)]
        try:
            reports[metric] = cd_layout(metric, methods, datasets, matrix, alpha=alpha)
        except ValueError as exc:
            warnings.append(f"{metric}: rank comparison skipped ({exc})")
    return reports, warnings


def method_summary(records) -> list[dict]:
    """Per-method curve-mean averages across datasets, one row per metric."""
    rows = fsdem_rows(records)
    grouped: dict[tuple[str, str], list[float]] = {}
    for row in rows:
        if row["fsdem"] is not None:
            grouped.setdefault((row["method"], row["metric"]), []).append(row["fsdem"])
    return [
        {"method": method, "metric": metric, "mean_fsdem": float(np.mean(values))}
        for (method, metric), values in sorted(grouped.items())
    ]


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(path: Path, header: list[str], rows: list[dict]) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(row[col]) for col in header))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _cd_table_rows(report: ComparisonReport) -> list[dict]:
    rows = []
    for idx in report.ordering:
        rows.append(
            {
                "row_type": "rank",
                "a": report.methods[idx],
                "b": "",
                "value": float(report.avg_ranks[idx]),
            }
        )
    for (i, j), p in sorted(report.pairwise_p.items()):
        rows.append(
            {
                "row_type": "p_adjusted",
                "a": report.methods[i],
                "b": report.methods[j],
                "value": float(p),
            }
        )
    for cid, clique in enumerate(report.cliques):
        rows.append(
            {
                "row_type": "clique",
                "a": str(cid),
                "b": ";".join(report.methods[i] for i in clique),
                "value": float(len(clique)),
            }
        )
    return rows


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def analyze(
    store: str | Path,
    out_dir: str | Path,
    alpha: float = 0.05,
    metrics=None,
    datasets=None,
) -> AnalysisResult:
    """Write the FSDEM, Z-score and rank-comparison tables for a sweep store."""
    kind, records = load_records(store)
    if kind == "runtime":
        raise ValueError("analyze needs a sweep store; this one holds runtime records")
    if metrics:
        records = [r for r in records if r.metric in set(metrics)]
    if datasets:
        records = [r for r in records if r.dataset in set(datasets)]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    warnings = []

    paths.append(
        write_table(
            out_dir / "fsdem.csv",
            ["dataset", "method", "metric", "fsdem", "fsdem_mean_of_reps"],
            fsdem_rows(records),
        )
    )
    z_rows, z_warnings = zscore_rows(records, load_baseline(store))
    warnings.extend(z_warnings)
    paths.append(
        write_table(
            out_dir / "zscore.csv",
            ["dataset", "method", "metric", "k", "value", "zscore"],
            z_rows,
        )
    )
    reports, cd_warnings = cd_reports(records, alpha=alpha)
    warnings.extend(cd_warnings)
    for metric in sorted(reports):
        paths.append(
            write_table(
                out_dir / f"cd_{metric}.csv",
                ["row_type", "a", "b", "value"],
                _cd_table_rows(reports[metric]),
            )
        )
    return AnalysisResult(paths=paths, warnings=warnings)


def make_plots(
    store: str | Path,
    out_dir: str | Path,
    kinds=None,
    metrics=None,
    datasets=None,
    alpha: float = 0.05,
    cap_seconds: float | None = None,
) -> AnalysisResult:
    """Render SVG charts for a store: sweep/zscore/cdd or runtime kinds.

    With no ``kinds`` filter, every chart the store supports is written.
    """
    kind, records = load_records(store)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: list[Path] = []
    warnings: list[str] = []
    wanted_metrics = list(metrics) if metrics else list(METRICS)

    if kind == "runtime":
        if kinds and "runtime" not in kinds:
            return AnalysisResult(paths=[], warnings=["runtime store: only runtime plots"])
        by_var: dict[str, dict[str, list[RuntimeRecord]]] = {}
        for r in records:
            by_var.setdefault(r.varying, {}).setdefault(r.method, []).append(r)
        for varying in sorted(by_var):
            series = []
            for method in sorted(by_var[varying]):
                recs = sorted(by_var[varying][method], key=lambda r: r.grid_value)
                series.append(
                    (
                        method,
                        np.array([r.grid_value for r in recs], dtype=np.float64),
                        np.array([r.seconds for r in recs]),
                        np.array([r.over_cap for r in recs], dtype=bool),
                    )
                )
            path = out_dir / f"runtime_{varying}.svg"
            path.write_text(
                svg.render_runtime(varying, series, cap_seconds=cap_seconds),
                encoding="utf-8",
            )
            paths.append(path)
        return AnalysisResult(paths=paths, warnings=warnings)

    if kind is None:
        return AnalysisResult(paths=[], warnings=["empty store; nothing to plot"])

    if datasets:
        records = [r for r in records if r.dataset in set(datasets)]
    curves = mean_curves(records)
    baselines = load_baseline(store)
    all_datasets = sorted({key[0] for key in curves})

    if kinds is None or "sweep" in kinds:
        for dataset in all_datasets:
            for metric in wanted_metrics:
                series = [
                    (method, ks, values)
                    for (ds_name, method, met), (ks, values) in sorted(curves.items())
                    if ds_name == dataset and met == metric
                ]
                if not series:
                    continue
                stats = baselines.get(dataset, {}).get(metric)
                band = (stats.xs, stats.mean, stats.std) if stats is not None else None
                path = out_dir / f"sweep_{_safe_name(dataset)}_{metric}.svg"
                path.write_text(svg.render_sweep(dataset, metric, series, band), encoding="utf-8")
                paths.append(path)

    if kinds is None or "zscore" in kinds:
        z_rows, z_warnings = zscore_rows(records, baselines)
        warnings.extend(z_warnings)
        by_plot: dict[tuple[str, str], dict[str, list[tuple[int, float]]]] = {}
        for row in z_rows:
            by_plot.setdefault((row["dataset"], row["metric"]), {}).setdefault(
                row["method"], []
            ).append((row["k"], row["zscore"]))
        for (dataset, metric) in sorted(by_plot):
            if metric not in wanted_metrics:
                continue
            series = []
            for method in sorted(by_plot[(dataset, metric)]):
                pairs = sorted(by_plot[(dataset, metric)][method])
                series.append(
                    (
                        method,
                        np.array([k for k, _ in pairs], dtype=np.float64),
                        np.array([z for _, z in pairs]),
                    )
                )
            path = out_dir / f"zscore_{_safe_name(dataset)}_{metric}.svg"
            path.write_text(svg.render_zscore(dataset, metric, series), encoding="utf-8")
            paths.append(path)

    if kinds is None or "cdd" in kinds:
        reports, cd_warnings = cd_reports(records, alpha=alpha)
        warnings.extend(cd_warnings)
        for metric in sorted(reports):
            if metric not in wanted_metrics:
                continue
            path = out_dir / f"cdd_{metric}.svg"
            path.write_text(svg.render_cdd(reports[metric]), encoding="utf-8")
            paths.append(path)

    return AnalysisResult(paths=paths, warnings=warnings)
