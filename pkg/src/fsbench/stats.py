"""Aggregate analysis: metric curves, baseline Z-scores, rank statistics.

Turns raw per-k metric observations into the comparison quantities used
by the reports: the mean value of an interpolated metric curve (the
integral of the piecewise-linear interpolant divided by the x-range),
Z-scores against the random baseline's repetition distribution, Friedman
average ranks, pairwise Wilcoxon signed-rank tests with Holm correction,
and the clique structure of statistically indistinguishable methods.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import warnings

import numpy as np
import scipy.stats

__all__ = [
    "MetricCurve",
    "RandomBaselineStats",
    "ComparisonReport",
    "fsdem",
    "zscore",
    "friedman_ranks",
    "wilcoxon_signed_rank",
    "holm_adjust",
    "cd_layout",
]


@dataclasses.dataclass(frozen=True)
class MetricCurve:
    """Metric observations sampled at strictly increasing x positions."""

    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != values.shape or xs.shape[0] < 1:
            raise ValueError("curve needs matching non-empty x and value vectors")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("curve x positions must be strictly increasing")
        xs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", values)

    @property
    def a(self) -> float:
        return float(self.xs[0])

    @property
    def b(self) -> float:
        return float(self.xs[-1])


@dataclasses.dataclass(frozen=True)
class RandomBaselineStats:
    """Mean and standard deviation of the random baseline per grid position.

    Population (divide-by-repetitions) standard deviation, matching the
    convention used everywhere else in the suite.
    """

    xs: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    repetitions: int

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if not (xs.shape == mean.shape == std.shape) or xs.ndim != 1:
            raise ValueError("xs, mean and std must be vectors of equal length")
        if np.any(std < 0):
            raise ValueError("std must be non-negative")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        for arr in (xs, mean, std):
            arr.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def at(self, x: float) -> tuple[float, float]:
        hit = np.flatnonzero(self.xs == x)
        if hit.shape[0] == 0:
            raise ValueError(f"x={x} is not on the baseline grid")
        i = int(hit[0])
        return float(self.mean[i]), float(self.std[i])


@dataclasses.dataclass(frozen=True)
class ComparisonReport:
    """Rank comparison of methods on one metric across datasets.

    ``fsdem_matrix[i, j]`` is method i's curve mean on dataset j;
    ``avg_ranks`` are Friedman average ranks (1 = best); ``pairwise_p``
    maps method-index pairs (i < j) to Holm-adjusted two-sided Wilcoxon
    p-values; ``cliques`` are the maximal sets of mutually
    indistinguishable methods (adjusted p >= alpha) of size >= 2;
    ``ordering`` lists method indices best rank first.
    """

    metric: str
    methods: tuple[str, ...]
    datasets: tuple[str, ...]
    fsdem_matrix: np.ndarray
    avg_ranks: np.ndarray
    pairwise_p: dict[tuple[int, int], float]
    cliques: tuple[tuple[int, ...], ...]
    ordering: tuple[int, ...]
    alpha: float


def fsdem(curve: MetricCurve) -> float:
    """Mean of the piecewise-linear interpolant of ``curve`` over [a, b].

    The interpolant integral is exact (trapezoid rule on the nodes), so
    the value always lies between the curve's min and max.
    """
    if curve.xs.shape[0] < 2:
        raise ValueError("need at least 2 points")
    area = float(np.trapezoid(curve.values, curve.xs))
    return area / (curve.b - curve.a)


def zscore(p_method: float, base: RandomBaselineStats, x: float) -> float:
    """Method value at grid position x, in baseline standard deviations.

    A zero baseline deviation yields 0.0 when the value sits exactly at
    the mean and a signed infinity otherwise (rendered as +/-inf in
    reports).
    """
    mu, sigma = base.at(x)
    if sigma == 0.0:
        if p_method == mu:
            return 0.0
        return math.inf if p_method > mu else -math.inf
    return (p_method - mu) / sigma


def friedman_ranks(scores: np.ndarray, method_names=None) -> np.ndarray:
    """Average rank of each method across datasets (rank 1 = highest score).

    ``scores`` is methods x datasets.  Ties within a dataset receive
    average ranks.  Datasets containing NaN cells are dropped with a
    warning before ranking.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.shape[0] < 2:
        raise ValueError("need a methods x datasets matrix with >= 2 methods")
    keep = ~np.isnan(scores).any(axis=0)
    if not keep.all():
        warnings.warn(
            f"dropping {int((~keep).sum())} dataset column(s) with missing values",
            stacklevel=2,
        )
        scores = scores[:, keep]
    if scores.shape[1] < 2:
        raise ValueError("need >= 2 complete datasets")
    ranks = np.empty_like(scores)
    for j in range(scores.shape[1]):
        ranks[:, j] = scipy.stats.rankdata(-scores[:, j])
    return ranks.mean(axis=1)


def wilcoxon_signed_rank(x, y) -> float:
    """Two-sided signed-rank p-value for paired samples.

    Zero differences are dropped; if none remain the samples are
    identical and p = 1.0 by convention.  With m <= 20 nonzero
    differences the p-value is exact (full enumeration of the 2^m sign
    assignments via a rank-sum distribution); beyond that a normal
    approximation with tie correction and a 0.5 continuity correction is
    used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    diffs = x - y
    diffs = diffs[diffs != 0.0]
    m = diffs.shape[0]
    if m == 0:
        return 1.0
    ranks = scipy.stats.rankdata(np.abs(diffs))
    w_pos = float(ranks[diffs > 0].sum())
    w_neg = float(ranks[diffs < 0].sum())
    w = min(w_pos, w_neg)

    if m <= 20:
        # average ranks are half-integers; double them to get integer sums
        doubled = np.rint(2.0 * ranks).astype(np.int64)
        total = int(doubled.sum())
        counts = np.zeros(total + 1, dtype=np.float64)
        counts[0] = 1.0
        for r in doubled:
            counts[r:] += counts[: total + 1 - r].copy()
        w2 = int(round(2.0 * w))
        tail = counts[: w2 + 1].sum() / 2.0 ** m
        return min(1.0, 2.0 * tail)

    mu = m * (m + 1) / 4.0
    var = m * (m + 1) * (2 * m + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts)) / 48.0
    z = (w - mu + 0.5) / math.sqrt(var)
    return min(1.0, math.erfc(-z / math.sqrt(2.0)))


def holm_adjust(pvalues) -> list[float]:
    """Step-down multiple-testing adjustment of a p-value list.

    Sorted ascending, ``adjusted_(i) = max_{j<=i} (m-j+1) * p_(j)``
    clipped to 1, then mapped back to the input order.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    if p.ndim != 1 or p.shape[0] < 1:
        raise ValueError("need a non-empty p-value vector")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.shape[0]
    order = np.argsort(p, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, (m - i) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted.tolist()


def _maximal_cliques(n: int, adjacency: np.ndarray) -> list[tuple[int, ...]]:
    """Bron-Kerbosch enumeration, deterministic vertex order."""
    cliques: list[tuple[int, ...]] = []

    def expand(r: set, p: set, x: set):
        if not p and not x:
            cliques.append(tuple(sorted(r)))
            return
        pivot_pool = p | x
        pivot = max(sorted(pivot_pool), key=lambda v: len(p & _nbrs[v]))
        for v in sorted(p - _nbrs[pivot]):
            expand(r | {v}, p & _nbrs[v], x & _nbrs[v])
            p = p - {v}
            x = x | {v}

    _nbrs = [set(np.flatnonzero(adjacency[v]).tolist()) - {v} for v in range(n)]
    expand(set(), set(range(n)), set())
    return sorted(cliques)


def cd_layout(
    metric: str,
    methods,
    datasets,
    fsdem_matrix: np.ndarray,
    alpha: float = 0.05,
) -> ComparisonReport:
    """Critical-difference inputs for one metric.

    Average ranks come from the Friedman ranking of ``fsdem_matrix``
    (methods x datasets); every method pair is compared with a Wilcoxon
    signed-rank test over its paired per-dataset values, Holm-adjusted as
    one family; pairs at adjusted p >= alpha are joined and their maximal
    cliques (size >= 2) become the diagram's bars.
    """
    fsdem_matrix = np.asarray(fsdem_matrix, dtype=np.float64)
    methods = tuple(methods)
    datasets = tuple(datasets)
    m = len(methods)
    if fsdem_matrix.shape != (m, len(datasets)):
        raise ValueError("fsdem_matrix shape must be (methods, datasets)")
    avg_ranks = friedman_ranks(fsdem_matrix)

    pairs = list(itertools.combinations(range(m), 2))
    raw = [
        wilcoxon_signed_rank(fsdem_matrix[i], fsdem_matrix[j]) for i, j in pairs
    ]
    adjusted = holm_adjust(raw) if raw else []
    pairwise = {pair: adj for pair, adj in zip(pairs, adjusted)}

    adjacency = np.zeros((m, m), dtype=bool)
    for (i, j), adj in pairwise.items():
        if adj >= alpha:
            adjacency[i, j] = adjacency[j, i] = True
    cliques = tuple(c for c in _maximal_cliques(m, adjacency) if len(c) >= 2)

    ordering = tuple(int(i) for i in np.lexsort((np.arange(m), avg_ranks)))
    return ComparisonReport(
        metric=metric,
        methods=methods,
        datasets=datasets,
        fsdem_matrix=fsdem_matrix,
        avg_ranks=avg_ranks,
        pairwise_p=pairwise,
        cliques=cliques,
        ordering=ordering,
        alpha=alpha,
    )
