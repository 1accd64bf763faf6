"""Laplacian Score tests against a loop-based reference implementation."""

import numpy as np
import pytest
import scipy.sparse as sp

from fsbench.dataio import Dataset, synth_blobs
from fsbench.selectors import (
    GraphParams,
    knn_heat_kernel_graph,
    laplacian_score_ranking,
    laplacian_scores_from_graph,
)


def reference_graph(X, k):
    """Brute-force kNN heat-kernel graph built with explicit loops."""
    n = X.shape[0]
    dist2 = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            dist2[i, j] = np.sum((X[i] - X[j]) ** 2)
    neighbor_d2 = []
    pairs = []
    for i in range(n):
        order = sorted(range(n), key=lambda j: (dist2[i, j], j))
        order = [j for j in order if j != i][:k]
        for j in order:
            pairs.append((i, j))
            neighbor_d2.append(dist2[i, j])
    t = float(np.median(neighbor_d2))
    if t <= 0.0:
        t = 1.0
    W = np.zeros((n, n))
    for i, j in pairs:
        w = np.exp(-dist2[i, j] / t)
        W[i, j] = max(W[i, j], w)
        W[j, i] = max(W[j, i], w)
    return W


def reference_scores(X, W):
    """Laplacian Score per the degree-centered Rayleigh quotient."""
    n, d = X.shape
    deg = W.sum(axis=1)
    D = np.diag(deg)
    L = D - W
    one = np.ones(n)
    out = np.empty(d)
    for j in range(d):
        f = X[:, j]
        f_tilde = f - (f @ D @ one) / (one @ D @ one) * one
        den = f_tilde @ D @ f_tilde
        if den <= 0 or np.ptp(f) == 0:
            out[j] = np.inf
        else:
            out[j] = (f_tilde @ L @ f_tilde) / den
    return out


def test_graph_matches_reference():
    rng = np.random.default_rng(0)
    for trial in range(5):
        X = rng.normal(size=(20, 4))
        S = knn_heat_kernel_graph(X, GraphParams(k_neighbors=4)).toarray()
        np.testing.assert_allclose(S, reference_graph(X, 4), atol=1e-12)


def test_graph_is_symmetric_with_zero_diagonal():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(40, 6))
    S = knn_heat_kernel_graph(X, GraphParams(k_neighbors=5)).toarray()
    np.testing.assert_allclose(S, S.T, atol=0)
    np.testing.assert_array_equal(np.diag(S), 0.0)
    # every vertex keeps at least its own k edges
    assert (np.count_nonzero(S, axis=1) >= 5).all()


def test_graph_coincident_points_fall_back_to_unit_bandwidth():
    X = np.zeros((6, 3))
    S = knn_heat_kernel_graph(X, GraphParams(k_neighbors=2)).toarray()
    assert np.all(S[S > 0] == 1.0)


def test_fixed_bandwidth_mode():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(15, 3))
    gp = GraphParams(k_neighbors=3, bandwidth_mode="fixed", fixed_bandwidth=2.0)
    S = knn_heat_kernel_graph(X, gp).toarray()
    ref = reference_graph(X, 3)
    # recompute reference weights under the fixed bandwidth
    n = X.shape[0]
    for i in range(n):
        for j in range(n):
            if ref[i, j] > 0:
                d2 = np.sum((X[i] - X[j]) ** 2)
                ref[i, j] = np.exp(-d2 / 2.0)
    np.testing.assert_allclose(S, ref, atol=1e-12)


def test_scores_match_reference_on_random_data():
    rng = np.random.default_rng(3)
    for trial in range(20):
        X = rng.normal(size=(30, 10))
        S = knn_heat_kernel_graph(X, GraphParams(k_neighbors=5))
        got = laplacian_scores_from_graph(X, S)
        want = reference_scores(X, S.toarray())
        np.testing.assert_allclose(got, want, atol=1e-9, rtol=1e-9)


def test_scores_affine_invariant_given_fixed_graph():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(25, 6))
    S = knn_heat_kernel_graph(X, GraphParams(k_neighbors=4))
    base = laplacian_scores_from_graph(X, S)
    scale = rng.uniform(0.5, 3.0, size=6) * rng.choice([-1.0, 1.0], size=6)
    shift = rng.normal(size=6)
    transformed = laplacian_scores_from_graph(X * scale + shift, S)
    np.testing.assert_allclose(transformed, base, atol=1e-9, rtol=1e-9)


def test_constant_feature_scores_infinite_and_ranks_last():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(20, 5))
    X[:, 2] = 3.0
    ds = Dataset(name="const", X=X)
    ranking = laplacian_score_ranking(ds, GraphParams(k_neighbors=3))
    assert ranking.scores[2] == -np.inf
    assert ranking.order[-1] == 2


def test_structured_feature_beats_noise():
    ds = synth_blobs(60, 6, 2, 1, seed=6)
    ranking = laplacian_score_ranking(ds, GraphParams(k_neighbors=5))
    # feature 0 carries the cluster structure and must lead the ranking
    assert ranking.order[0] == 0


def test_ranking_needs_enough_points():
    ds = synth_blobs(4, 3, 2, 1, seed=7)
    with pytest.raises(ValueError):
        laplacian_score_ranking(ds, GraphParams(k_neighbors=5))


def test_scores_accept_dense_graph():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(12, 4))
    S = knn_heat_kernel_graph(X, GraphParams(k_neighbors=3))
    dense = laplacian_scores_from_graph(X, S.toarray())
    sparse = laplacian_scores_from_graph(X, S)
    np.testing.assert_allclose(dense, sparse, atol=1e-12)


def test_scores_reject_empty_graph():
    X = np.random.default_rng(9).normal(size=(5, 2))
    with pytest.raises(ValueError):
        laplacian_scores_from_graph(X, sp.csr_matrix((5, 5)))
