"""Feature-ranking methods.

Every method reduces to the same artifact: a :class:`FeatureRanking`
holding one score per feature, direction-normalized so that higher means
more important, and the induced descending-order permutation (ties broken
by ascending feature index).  Implemented methods: seeded uniform-random
scores, per-feature variance, mean-absolute-correlation redundancy,
Laplacian Score on a kNN heat-kernel graph, and multi-cluster selection
via spectral embedding plus per-eigenvector lasso.  Arbitrary external
scorers plug in through a subprocess protocol.
"""

from __future__ import annotations

import dataclasses
import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

from . import dataio
from ._kernels import lasso_cd
from .dataio import Dataset

__all__ = [
    "FeatureRanking",
    "GraphParams",
    "PluginError",
    "random_ranking",
    "variance_ranking",
    "correlation_ranking",
    "laplacian_score_ranking",
    "laplacian_scores_from_graph",
    "knn_heat_kernel_graph",
    "mcfs_ranking",
    "external_ranking",
    "top_k",
    "TopKSelector",
]

_CHUNK = 256  # rows per block in pairwise-distance / correlation passes


@dataclasses.dataclass(frozen=True)
class FeatureRanking:
    """Per-feature scores plus the induced selection order.

    ``scores[j]`` is feature ``j``'s importance (higher = better; methods
    whose native quantity is lower-is-better are negated before reaching
    here).  ``order`` sorts features by descending score, ties broken by
    ascending feature index, so ``order[:k]`` is always the top-k
    selection and prefixes nest.
    """

    scores: np.ndarray
    order: np.ndarray
    method: str
    seed: int | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        order = np.asarray(self.order, dtype=np.int64)
        if scores.ndim != 1 or scores.shape[0] < 1:
            raise ValueError("scores must be a non-empty vector")
        if np.isnan(scores).any():
            raise ValueError(f"method {self.method!r} produced NaN scores")
        d = scores.shape[0]
        if order.shape != (d,) or not np.array_equal(np.sort(order), np.arange(d)):
            raise ValueError("order must be a permutation of 0..d-1")
        ranked = scores[order]
        if np.any(ranked[:-1] < ranked[1:]):
            raise ValueError("order must sort scores in descending order")
        for i in range(d - 1):
            if ranked[i] == ranked[i + 1] and order[i] > order[i + 1]:
                raise ValueError("ties must be broken by ascending feature index")
        scores.setflags(write=False)
        order.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "order", order)

    @classmethod
    def from_scores(
        cls, scores: np.ndarray, method: str, seed: int | None = None
    ) -> "FeatureRanking":
        scores = np.asarray(scores, dtype=np.float64)
        order = np.argsort(-scores, kind="stable")
        return cls(scores=scores, order=order, method=method, seed=seed)

    @property
    def d(self) -> int:
        return self.scores.shape[0]


def top_k(r: FeatureRanking, k: int) -> np.ndarray:
    """First ``k`` entries of the ranking order, best first."""
    if not 1 <= k <= r.d:
        raise ValueError(f"k must be in [1, {r.d}], got {k}")
    return r.order[:k].copy()


@dataclasses.dataclass(frozen=True)
class GraphParams:
    """kNN similarity-graph settings shared by the spectral selectors.

    ``bandwidth_mode`` picks the heat-kernel bandwidth: ``median-heuristic``
    uses the median squared distance over connected pairs, ``fixed`` uses
    ``fixed_bandwidth``.
    """

    k_neighbors: int = 5
    bandwidth_mode: str = "median-heuristic"
    fixed_bandwidth: float | None = None

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")
        if self.bandwidth_mode not in ("median-heuristic", "fixed"):
            raise ValueError(f"unknown bandwidth_mode {self.bandwidth_mode!r}")
        if self.bandwidth_mode == "fixed":
            if self.fixed_bandwidth is None or not self.fixed_bandwidth > 0:
                raise ValueError("fixed bandwidth_mode requires a positive fixed_bandwidth")


class PluginError(RuntimeError):
    """External scorer failure; ``kind`` is one of exit/output/count/timeout."""

    def __init__(self, kind: str, command: str, detail: str):
        self.kind = kind
        self.command = command
        self.detail = detail
        super().__init__(f"external method {command!r} failed ({kind}): {detail}")


def random_ranking(d: int, seed: int) -> FeatureRanking:
    """Rank ``d`` features by i.i.d. uniform [0,1) scores drawn under ``seed``."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    scores = np.random.default_rng(seed).random(d)
    return FeatureRanking.from_scores(scores, method="random", seed=seed)


def variance_ranking(ds: Dataset) -> FeatureRanking:
    """Rank by per-feature population variance (computed on the matrix as given)."""
    return FeatureRanking.from_scores(ds.X.var(axis=0), method="variance")


def correlation_ranking(ds: Dataset) -> FeatureRanking:
    """Rank features by low redundancy: 1 minus mean absolute Pearson correlation.

    ``redundancy_j`` averages ``|pearson(f_j, f_i)|`` over all other
    features ``i``; any pair touching a zero-variance feature contributes
    correlation 0, so constant features get redundancy 0 and rank first.
    """
    n, d = ds.X.shape
    if d < 2:
        raise ValueError("correlation ranking needs at least 2 features")
    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    zero_var = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    Z = (ds.X - mean) / np.where(zero_var, 1.0, std)
    Z[:, zero_var] = 0.0

    # |corr| column sums accumulated in feature blocks to bound memory at
    # O(d * block) for wide matrices
    abs_sum = np.empty(d)
    diag = np.empty(d)
    for j0 in range(0, d, _CHUNK):
        j1 = min(j0 + _CHUNK, d)
        block = (Z.T @ Z[:, j0:j1]) / n
        abs_sum[j0:j1] = np.abs(block).sum(axis=0)
        diag[j0:j1] = block[np.arange(j0, j1), np.arange(j1 - j0)]
    redundancy = (abs_sum - diag) / (d - 1)
    return FeatureRanking.from_scores(1.0 - redundancy, method="correlation")


def knn_heat_kernel_graph(X: np.ndarray, gp: GraphParams) -> sp.csr_matrix:
    """Symmetrized kNN similarity graph with heat-kernel edge weights.

    Each point lists its ``k_neighbors`` nearest others (squared Euclidean
    distance, ties toward lower index); an edge exists when either
    endpoint lists the other.  Weights are ``exp(-dist2 / t)`` with ``t``
    from ``gp``; a median bandwidth of 0 (coincident points) falls back to
    ``t = 1``, which leaves the zero-distance weights at 1.
    """
    n = X.shape[0]
    k = gp.k_neighbors
    if k >= n:
        raise ValueError(f"k_neighbors must be < n ({n}), got {k}")
    sq_norms = np.einsum("ij,ij->i", X, X)
    rows = np.empty(n * k, dtype=np.int64)
    cols = np.empty(n * k, dtype=np.int64)
    d2s = np.empty(n * k, dtype=np.float64)
    pos = 0
    for i0 in range(0, n, _CHUNK):
        i1 = min(i0 + _CHUNK, n)
        block = sq_norms[i0:i1, None] + sq_norms[None, :] - 2.0 * (X[i0:i1] @ X.T)
        np.maximum(block, 0.0, out=block)
        block[np.arange(i1 - i0), np.arange(i0, i1)] = np.inf  # exclude self
        order = np.argsort(block, axis=1, kind="stable")[:, :k]
        m = i1 - i0
        rows[pos : pos + m * k] = np.repeat(np.arange(i0, i1), k)
        cols[pos : pos + m * k] = order.ravel()
        d2s[pos : pos + m * k] = np.take_along_axis(block, order, axis=1).ravel()
        pos += m * k

    if gp.bandwidth_mode == "fixed":
        t = float(gp.fixed_bandwidth)
    else:
        t = float(np.median(d2s))
        if t <= 0.0:
            t = 1.0
    weights = np.exp(-d2s / t)
    W = sp.coo_matrix((weights, (rows, cols)), shape=(n, n)).tocsr()
    return W.maximum(W.T)


def laplacian_scores_from_graph(X: np.ndarray, S: sp.spmatrix | np.ndarray) -> np.ndarray:
    """Locality-preservation score of each feature on a given similarity graph.

    For feature ``f`` with degree-weighted centering
    ``f~ = f - (f.T D 1 / 1.T D 1) 1``, the score is
    ``(f~.T L f~) / (f~.T D f~)`` where ``L = D - S``.  Lower is better.
    Constant features (zero denominator) get ``+inf``.
    """
    S = sp.csr_matrix(S)
    deg = np.asarray(S.sum(axis=1)).ravel()
    deg_total = deg.sum()
    if deg_total <= 0:
        raise ValueError("graph has no edges")
    F = X - (deg @ X / deg_total)[None, :]
    den = np.einsum("ij,i,ij->j", F, deg, F)
    num = den - np.einsum("ij,ij->j", F, S @ F)
    constant = (den <= 0.0) | (np.ptp(X, axis=0) == 0.0)
    out = np.full(X.shape[1], np.inf)
    ok = ~constant
    out[ok] = num[ok] / den[ok]
    return out


def laplacian_score_ranking(ds: Dataset, gp: GraphParams | None = None) -> FeatureRanking:
    """Rank features by (negated) Laplacian Score; locality-preserving first.

    Constant features carry an infinite score and always rank last.
    """
    if gp is None:
        gp = GraphParams()
    if ds.n < gp.k_neighbors + 1:
        raise ValueError(
            f"need n >= k_neighbors + 1 (n={ds.n}, k_neighbors={gp.k_neighbors})"
        )
    S = knn_heat_kernel_graph(ds.X, gp)
    ls = laplacian_scores_from_graph(ds.X, S)
    return FeatureRanking.from_scores(-ls, method="laplacian_score")


def mcfs_ranking(
    ds: Dataset,
    gp: GraphParams | None = None,
    n_eigen: int | None = None,
    l1_penalty: float | None = None,
) -> FeatureRanking:
    """Multi-cluster selection: spectral embedding, then sparse regression.

    The ``n_eigen`` smallest nontrivial generalized eigenvectors of
    ``L y = lambda D y`` are computed through the dense symmetric
    eigen-decomposition of the normalized Laplacian and back-transformed;
    each one is regressed on the features with an L1 penalty (cyclic
    coordinate descent, tolerance 1e-6, at most 10,000 sweeps) and a
    feature's score is its largest absolute coefficient across the
    eigenvectors.

    ``n_eigen`` defaults to the class count when labels exist, else 5,
    clipped to ``n - 1``.  ``l1_penalty`` defaults per eigenvector to
    ``0.01 * max|X.T y_k|``.
    """
    if gp is None:
        gp = GraphParams()
    n, d = ds.X.shape
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if n_eigen is None:
        n_eigen = ds.n_classes if ds.y is not None else 5
        n_eigen = min(n_eigen, n - 1)
    if not 1 <= n_eigen <= n - 1:
        raise ValueError(f"n_eigen must be in [1, {n - 1}], got {n_eigen}")
    if l1_penalty is not None and not l1_penalty > 0:
        raise ValueError(f"l1_penalty must be positive, got {l1_penalty}")
    if ds.n < gp.k_neighbors + 1:
        raise ValueError(
            f"need n >= k_neighbors + 1 (n={ds.n}, k_neighbors={gp.k_neighbors})"
        )

    S = knn_heat_kernel_graph(ds.X, gp)
    deg = np.asarray(S.sum(axis=1)).ravel()
    if np.any(deg <= 0):
        bad = int(np.argmax(deg <= 0))
        raise ValueError(
            f"vertex {bad} is isolated; increase k_neighbors (currently {gp.k_neighbors})"
        )
    inv_sqrt = 1.0 / np.sqrt(deg)
    L_sym = -((S.multiply(inv_sqrt[:, None])).multiply(inv_sqrt[None, :])).toarray()
    L_sym[np.arange(n), np.arange(n)] += 1.0
    L_sym = 0.5 * (L_sym + L_sym.T)
    eigvals, eigvecs = np.linalg.eigh(L_sym)
    # index 0 is the trivial constant direction (eigenvalue 0)
    chosen = eigvecs[:, 1 : 1 + n_eigen]

    X = np.ascontiguousarray(ds.X, dtype=np.float64)
    scores = np.zeros(d)
    for kidx in range(chosen.shape[1]):
        y = inv_sqrt * chosen[:, kidx]
        if l1_penalty is None:
            beta = 0.01 * float(np.max(np.abs(X.T @ y)))
            if beta <= 0.0:
                continue
        else:
            beta = float(l1_penalty)
        a = lasso_cd(X, y, beta, 10000, 1e-6)
        np.maximum(scores, np.abs(a), out=scores)
    return FeatureRanking.from_scores(scores, method="mcfs")


def external_ranking(
    ds: Dataset, command: str, timeout: float, *, name: str = "external"
) -> FeatureRanking:
    """Score features with an external program.

    The feature matrix (no labels, no header) is written to a temporary
    CSV and the program is invoked as ``<command> <csv-path>``.  It must
    print exactly ``d`` whitespace-separated finite real scores to stdout
    and exit 0; any other behavior raises :class:`PluginError` so the
    caller can record the method as failed.
    """
    argv = shlex.split(command)
    if not argv:
        raise PluginError("exit", command, "empty command")
    with tempfile.TemporaryDirectory(prefix="fsbench_plugin_") as tmp:
        csv_path = Path(tmp) / "data.csv"
        dataio.write_csv(Dataset(name=ds.name, X=ds.X), csv_path)
        try:
            proc = subprocess.run(
                argv + [str(csv_path)],
                capture_output=True,
                text=True,
                timeout=timeout,
            )
        except subprocess.TimeoutExpired:
            raise PluginError("timeout", command, f"no result within {timeout} s") from None
        except OSError as exc:
            raise PluginError("exit", command, f"could not execute: {exc}") from None
    if proc.returncode != 0:
        raise PluginError(
            "exit", command, f"exit code {proc.returncode}: {proc.stderr.strip()[:500]}"
        )
    tokens = proc.stdout.split()
    if len(tokens) != ds.d:
        raise PluginError("count", command, f"expected {ds.d} scores, got {len(tokens)}")
    try:
        scores = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise PluginError("output", command, str(exc)) from None
    if not np.all(np.isfinite(scores)):
        raise PluginError("output", command, "non-finite score in output")
    return FeatureRanking.from_scores(scores, method=name)


class TopKSelector(BaseEstimator, TransformerMixin):
    """Estimator-style wrapper: fit ranks features, transform keeps the top k.

    Parameters
    ----------
    method : str
        One of random, variance, correlation, laplacian_score, mcfs.
    k : int
        Number of features kept by transform.
    seed : int
        Used by the random method only.
    graph_params : GraphParams, optional
        Graph settings for laplacian_score and mcfs.
    """

    def __init__(self, method: str = "variance", k: int = 10, seed: int = 0,
                 graph_params: GraphParams | None = None):
        self.method = method
        self.k = k
        self.seed = seed
        self.graph_params = graph_params

    def fit(self, X, y=None):
        ds = Dataset(name="fit", X=np.asarray(X, dtype=np.float64), y=y)
        if self.method == "random":
            self.ranking_ = random_ranking(ds.d, self.seed)
        elif self.method == "variance":
            self.ranking_ = variance_ranking(ds)
        elif self.method == "correlation":
            self.ranking_ = correlation_ranking(ds)
        elif self.method == "laplacian_score":
            self.ranking_ = laplacian_score_ranking(ds, self.graph_params)
        elif self.method == "mcfs":
            self.ranking_ = mcfs_ranking(ds, self.graph_params)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        return self

    def transform(self, X):
        if not hasattr(self, "ranking_"):
            raise RuntimeError("TopKSelector is not fitted")
        X = np.asarray(X)
        return X[:, top_k(self.ranking_, self.k)]
