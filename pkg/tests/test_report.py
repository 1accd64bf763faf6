"""Tests for the analysis tables and SVG chart writers."""

import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fsbench.dataio import synth_blobs
from fsbench.harness import (
    Config,
    RecordWriter,
    RuntimeGrid,
    SweepSpec,
    run_runtime_bench,
    run_sweep,
    save_baseline,
    save_records,
)
from fsbench.report import analyze, make_plots, method_summary


METHODS = ("random", "variance", "correlation")


def build_store(path, n_datasets=2):
    config = Config(repetitions=3, cv_folds=3, kmeans_runs=2, forest_trees=10,
                    master_seed=11, record_timings=False)
    spec = SweepSpec(start=0.25, stop=1.0, step=0.25)
    baselines = {}
    with RecordWriter(path, "sweep") as writer:
        for i in range(n_datasets):
            ds = synth_blobs(36, 8, 2, 3, seed=20 + i, name=f"blobs{i}")
            result = run_sweep(ds, METHODS, spec, config, writer=writer)
            baselines[ds.name] = result.baseline
    save_baseline(path, baselines)
    return path


@pytest.fixture(scope="module")
def sweep_store(tmp_path_factory):
    return build_store(tmp_path_factory.mktemp("store") / "records.jsonl")


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_analyze_writes_expected_tables(sweep_store, tmp_path):
    result = analyze(sweep_store, tmp_path)
    names = sorted(p.name for p in result.paths)
    assert "fsdem.csv" in names
    assert "zscore.csv" in names
    for metric in ("ACC", "AUC", "CLSACC", "NMI"):
        assert f"cd_{metric}.csv" in names
    assert result.warnings == []


def test_fsdem_table_matches_direct_recompute(sweep_store, tmp_path):
    from fsbench.harness import load_records

    analyze(sweep_store, tmp_path)
    rows = read_csv(tmp_path / "fsdem.csv")
    _, records = load_records(sweep_store)

    def curve_mean(dataset, method, metric):
        cells = {}
        for r in records:
            if (r.dataset, r.method, r.metric) == (dataset, method, metric):
                cells.setdefault(r.k, []).append(r.value)
        ks = sorted(cells)
        means = [np.mean(cells[k]) for k in ks]
        a, b = ks[0], ks[-1]
        return np.trapezoid(means, ks) / (b - a)

    assert len(rows) == 2 * len(METHODS) * 4
    for row in rows:
        expected = curve_mean(row["dataset"], row["method"], row["metric"])
        assert float(row["fsdem"]) == pytest.approx(expected, abs=1e-9)


def test_zscore_table_random_rows_are_zero(sweep_store, tmp_path):
    analyze(sweep_store, tmp_path)
    rows = read_csv(tmp_path / "zscore.csv")
    random_rows = [r for r in rows if r["method"] == "random"]
    assert random_rows, "expected random-method rows in the Z table"
    for row in random_rows:
        assert abs(float(row["zscore"])) < 1e-12


def test_cd_tables_rank_sums(sweep_store, tmp_path):
    analyze(sweep_store, tmp_path)
    m = len(METHODS)
    for metric in ("ACC", "AUC", "CLSACC", "NMI"):
        rows = read_csv(tmp_path / f"cd_{metric}.csv")
        ranks = [float(r["value"]) for r in rows if r["row_type"] == "rank"]
        assert len(ranks) == m
        assert sum(ranks) == pytest.approx(m * (m + 1) / 2)
        pairs = [r for r in rows if r["row_type"] == "p_adjusted"]
        assert len(pairs) == m * (m - 1) // 2
        for row in pairs:
            assert 0.0 <= float(row["value"]) <= 1.0
        for row in rows:
            if row["row_type"] == "clique":
                members = row["b"].split(";")
                assert len(members) == int(float(row["value"])) >= 2


def test_analyze_is_byte_deterministic(sweep_store, tmp_path):
    first = analyze(sweep_store, tmp_path / "a")
    second = analyze(sweep_store, tmp_path / "b")
    for pa, pb in zip(sorted(first.paths), sorted(second.paths)):
        assert pa.name == pb.name
        assert pa.read_bytes() == pb.read_bytes()


def test_single_dataset_skips_rank_comparison(tmp_path):
    store = build_store(tmp_path / "one.jsonl", n_datasets=1)
    result = analyze(store, tmp_path / "out")
    names = {p.name for p in result.paths}
    assert not any(n.startswith("cd_") for n in names)
    assert len(result.warnings) == 4
    assert all("skipped" in w for w in result.warnings)


def test_analyze_without_baseline_sidecar_warns(sweep_store, tmp_path):
    store = tmp_path / "nobase.jsonl"
    store.write_bytes(sweep_store.read_bytes())
    result = analyze(store, tmp_path / "out")
    assert any("baseline" in w for w in result.warnings)
    rows = read_csv(tmp_path / "out" / "zscore.csv")
    assert rows == []


def test_analyze_rejects_runtime_store(tmp_path):
    grid = RuntimeGrid(varying="features", fixed=20, start=4, stop=8, step=4,
                       cap_seconds=60.0)
    records = run_runtime_bench(("random",), grid, seed=1)
    store = tmp_path / "runtime.jsonl"
    save_records(store, records, "runtime")
    with pytest.raises(ValueError, match="runtime"):
        analyze(store, tmp_path / "out")


def test_metric_and_dataset_filters(sweep_store, tmp_path):
    analyze(sweep_store, tmp_path, metrics=["ACC"], datasets=["blobs0"])
    rows = read_csv(tmp_path / "fsdem.csv")
    assert {r["metric"] for r in rows} == {"ACC"}
    assert {r["dataset"] for r in rows} == {"blobs0"}


def test_method_summary_averages_over_datasets(sweep_store):
    from fsbench.harness import load_records

    _, records = load_records(sweep_store)
    rows = method_summary(records)
    assert {r["method"] for r in rows} == set(METHODS)
    for row in rows:
        assert 0.0 <= row["mean_fsdem"] <= 1.0


def assert_well_formed_svg(path):
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")


def test_make_plots_writes_well_formed_svgs(sweep_store, tmp_path):
    result = make_plots(sweep_store, tmp_path)
    names = sorted(p.name for p in result.paths)
    for ds in ("blobs0", "blobs1"):
        for metric in ("ACC", "AUC", "CLSACC", "NMI"):
            assert f"sweep_{ds}_{metric}.svg" in names
            assert f"zscore_{ds}_{metric}.svg" in names
    assert any(n.startswith("cdd_") for n in names)
    for path in result.paths:
        assert_well_formed_svg(path)


def test_sweep_plot_contains_baseline_band_and_series(sweep_store, tmp_path):
    make_plots(sweep_store, tmp_path, kinds=["sweep"], metrics=["ACC"],
               datasets=["blobs0"])
    text = (tmp_path / "sweep_blobs0_ACC.svg").read_text()
    for method in METHODS:
        assert method in text
    assert "polygon" in text  # the +/- one-sigma band around the random mean


def test_make_plots_is_byte_deterministic(sweep_store, tmp_path):
    first = make_plots(sweep_store, tmp_path / "a")
    second = make_plots(sweep_store, tmp_path / "b")
    for pa, pb in zip(sorted(first.paths), sorted(second.paths)):
        assert pa.read_bytes() == pb.read_bytes()


def test_make_plots_empty_store(tmp_path):
    result = make_plots(tmp_path / "absent.jsonl", tmp_path / "out")
    assert result.paths == []
    assert any("empty" in w for w in result.warnings)


def test_make_plots_runtime_store(tmp_path):
    grid = RuntimeGrid(varying="instances", fixed=6, start=20, stop=40, step=20,
                       cap_seconds=60.0)
    records = run_runtime_bench(("random", "variance"), grid, seed=2)
    store = tmp_path / "runtime.jsonl"
    save_records(store, records, "runtime")
    result = make_plots(store, tmp_path / "out", cap_seconds=60.0)
    assert [p.name for p in result.paths] == ["runtime_instances.svg"]
    assert_well_formed_svg(result.paths[0])
    text = result.paths[0].read_text()
    assert "random" in text and "variance" in text
