"""Tests for ranking construction and the non-spectral selectors."""

import numpy as np
import pytest
from sklearn.base import clone

from fsbench.dataio import Dataset, standardize, synth_blobs
from fsbench.selectors import (
    FeatureRanking,
    PluginError,
    TopKSelector,
    correlation_ranking,
    external_ranking,
    random_ranking,
    top_k,
    variance_ranking,
)


def brute_force_order(scores):
    """Reference ordering: descending score, ties by ascending index."""
    return np.array(
        sorted(range(len(scores)), key=lambda j: (-scores[j], j)), dtype=np.int64
    )


def test_from_scores_matches_reference_comparator():
    rng = np.random.default_rng(0)
    for _ in range(200):
        d = int(rng.integers(1, 20))
        # coarse quantization forces plenty of ties
        scores = rng.integers(0, 4, size=d).astype(np.float64)
        ranking = FeatureRanking.from_scores(scores, method="t")
        np.testing.assert_array_equal(ranking.order, brute_force_order(scores))


def test_ranking_rejects_non_permutation():
    with pytest.raises(ValueError):
        FeatureRanking(
            scores=np.array([1.0, 2.0]), order=np.array([0, 0]), method="t"
        )


def test_ranking_rejects_wrong_sort():
    with pytest.raises(ValueError):
        FeatureRanking(
            scores=np.array([1.0, 2.0]), order=np.array([0, 1]), method="t"
        )


def test_ranking_rejects_wrong_tie_break():
    with pytest.raises(ValueError):
        FeatureRanking(
            scores=np.array([1.0, 1.0]), order=np.array([1, 0]), method="t"
        )


def test_ranking_rejects_nan_scores():
    with pytest.raises(ValueError):
        FeatureRanking.from_scores(np.array([1.0, np.nan]), method="t")


def test_top_k_prefixes_nest():
    ranking = random_ranking(12, seed=5)
    previous = []
    for k in range(1, 13):
        subset = top_k(ranking, k)
        assert len(subset) == k
        assert list(subset[: len(previous)]) == previous
        previous = list(subset)


def test_top_k_bounds():
    ranking = random_ranking(4, seed=1)
    with pytest.raises(ValueError):
        top_k(ranking, 0)
    with pytest.raises(ValueError):
        top_k(ranking, 5)


def test_random_ranking_seeded():
    a = random_ranking(30, seed=7)
    b = random_ranking(30, seed=7)
    c = random_ranking(30, seed=8)
    np.testing.assert_array_equal(a.order, b.order)
    assert not np.array_equal(a.order, c.order)
    assert a.scores.min() >= 0.0 and a.scores.max() < 1.0


def test_variance_ranking_matches_numpy():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(25, 8)) * rng.uniform(0.1, 5.0, size=8)
    ds = Dataset(name="v", X=X)
    ranking = variance_ranking(ds)
    np.testing.assert_allclose(ranking.scores, X.var(axis=0), atol=1e-12)
    np.testing.assert_array_equal(ranking.order, brute_force_order(ranking.scores))


def test_correlation_ranking_matches_naive_pairwise():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 9))
    X[:, 3] = 2.0 * X[:, 1] + 0.01 * rng.normal(size=40)  # near-duplicate pair
    ds = Dataset(name="c", X=X)
    ranking = correlation_ranking(ds)

    corr = np.corrcoef(X, rowvar=False)
    expected = 1.0 - (np.abs(corr).sum(axis=0) - 1.0) / (X.shape[1] - 1)
    np.testing.assert_allclose(ranking.scores, expected, atol=1e-10)


def test_correlation_ranking_constant_feature_least_redundant():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 5))
    X[:, 2] = 1.5
    ds = Dataset(name="cc", X=X)
    ranking = correlation_ranking(ds)
    # a constant feature correlates with nothing, so its redundancy is zero
    assert ranking.scores[2] == 1.0
    assert ranking.order[0] == 2


def test_correlation_ranking_needs_two_features():
    ds = Dataset(name="one", X=np.random.default_rng(0).normal(size=(10, 1)))
    with pytest.raises(ValueError):
        correlation_ranking(ds)


def test_correlation_duplicate_feature_ranks_last():
    rng = np.random.default_rng(6)
    base = rng.normal(size=(50, 4))
    X = np.column_stack([base, base[:, 0]])  # feature 4 duplicates feature 0
    ds = Dataset(name="dup", X=X)
    ranking = correlation_ranking(ds)
    assert set(ranking.order[-2:]) == {0, 4}


def test_external_ranking_round_trip(tmp_path):
    script = tmp_path / "scorer.py"
    script.write_text(
        "import sys\n"
        "cols = len(open(sys.argv[1]).readline().split(','))\n"
        "print(' '.join(str(float(cols - i)) for i in range(cols)))\n"
    )
    ds = synth_blobs(10, 5, 2, 2, seed=0)
    ranking = external_ranking(ds, f"python3 {script}", 60.0, name="plug")
    np.testing.assert_array_equal(ranking.order, np.arange(5))
    assert ranking.method == "plug"


def test_external_ranking_failure_kinds(tmp_path):
    ds = synth_blobs(8, 4, 2, 2, seed=1)
    wrong = tmp_path / "wrong.py"
    wrong.write_text("print('1 2')\n")
    with pytest.raises(PluginError) as err:
        external_ranking(ds, f"python3 {wrong}", 60.0)
    assert err.value.kind == "count"

    crash = tmp_path / "crash.py"
    crash.write_text("raise SystemExit(3)\n")
    with pytest.raises(PluginError) as err:
        external_ranking(ds, f"python3 {crash}", 60.0)
    assert err.value.kind == "exit"

    garbage = tmp_path / "garbage.py"
    garbage.write_text("print('a b c d')\n")
    with pytest.raises(PluginError) as err:
        external_ranking(ds, f"python3 {garbage}", 60.0)
    assert err.value.kind == "output"

    slow = tmp_path / "slow.py"
    slow.write_text("import time\ntime.sleep(10)\n")
    with pytest.raises(PluginError) as err:
        external_ranking(ds, f"python3 {slow}", 0.5)
    assert err.value.kind == "timeout"


def test_external_ranking_rejects_non_finite(tmp_path):
    ds = synth_blobs(8, 3, 2, 2, seed=2)
    script = tmp_path / "inf.py"
    script.write_text("print('1.0 inf 2.0')\n")
    with pytest.raises(PluginError) as err:
        external_ranking(ds, f"python3 {script}", 60.0)
    assert err.value.kind == "output"


def test_external_ranking_missing_binary():
    ds = synth_blobs(8, 3, 2, 2, seed=3)
    with pytest.raises(PluginError) as err:
        external_ranking(ds, "definitely-not-a-real-binary-xyz", 60.0)
    assert err.value.kind == "exit"


def test_top_k_selector_estimator_api():
    ds = synth_blobs(30, 8, 2, 3, seed=4)
    std, _ = standardize(ds)
    sel = TopKSelector(method="variance", k=3)
    assert sel.get_params()["k"] == 3
    cloned = clone(sel)
    out = cloned.fit(std.X).transform(std.X)
    assert out.shape == (30, 3)
    np.testing.assert_array_equal(out, std.X[:, cloned.ranking_.order[:3]])


def test_top_k_selector_unfitted_and_unknown_method():
    sel = TopKSelector(method="variance", k=2)
    with pytest.raises(RuntimeError):
        sel.transform(np.zeros((3, 4)))
    bad = TopKSelector(method="nope", k=2)
    with pytest.raises(ValueError):
        bad.fit(np.random.default_rng(0).normal(size=(10, 4)))
