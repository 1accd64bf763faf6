"""Downstream evaluation of a feature subset.

Supervised route: stratified cross-validation with a vote-fraction random
forest, scored by accuracy and macro one-vs-rest AUC.  Unsupervised
route: repeated k-means, scored by optimal-assignment clustering accuracy
and normalized mutual information.  All evaluators are pure functions of
their seeds.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import scipy.optimize
import scipy.stats
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin

from ._kernels import forest_votes, grow_forest, kmeans_fit
from .dataio import Dataset
from .seeds import derive_seed

__all__ = [
    "ConfusionCounts",
    "FoldPlan",
    "Assignment",
    "DownstreamScores",
    "KMeansResult",
    "stratified_folds",
    "rf_train_predict",
    "accuracy",
    "auc",
    "kmeans",
    "hungarian",
    "clustering_accuracy",
    "nmi",
    "evaluate_supervised",
    "evaluate_unsupervised",
    "VoteForestClassifier",
    "KMeans",
]


@dataclasses.dataclass(frozen=True)
class ConfusionCounts:
    """Binary (or one-vs-rest) confusion counts."""

    tp: int
    tn: int
    fp: int
    fn: int

    @classmethod
    def from_predictions(cls, pred, truth, positive) -> "ConfusionCounts":
        pred = np.asarray(pred)
        truth = np.asarray(truth)
        if pred.shape != truth.shape:
            raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
        p = pred == positive
        t = truth == positive
        return cls(
            tp=int(np.sum(p & t)),
            tn=int(np.sum(~p & ~t)),
            fp=int(np.sum(p & ~t)),
            fn=int(np.sum(~p & t)),
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclasses.dataclass(frozen=True)
class FoldPlan:
    """Cross-validation fold assignment: ``assignment[i]`` is instance i's fold."""

    assignment: np.ndarray
    n_folds: int

    def train_test(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        test = np.flatnonzero(self.assignment == fold)
        train = np.flatnonzero(self.assignment != fold)
        return train, test


@dataclasses.dataclass(frozen=True)
class Assignment:
    """Injective minimum-cost row-to-column mapping."""

    mapping: dict[int, int]
    total_cost: float


@dataclasses.dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    inertia_trace: np.ndarray


@dataclasses.dataclass(frozen=True)
class DownstreamScores:
    """Aggregated metric values plus the raw per-fold / per-run values.

    Supervised evaluation fills ``acc``/``auc``; unsupervised fills
    ``clsacc``/``nmi``.  Each aggregate is the arithmetic mean of the
    matching entry in ``raw``.
    """

    acc: float | None = None
    auc: float | None = None
    clsacc: float | None = None
    nmi: float | None = None
    raw: dict = dataclasses.field(default_factory=dict)

    def as_metric_dict(self) -> dict[str, float]:
        out = {}
        for key, label in (("acc", "ACC"), ("auc", "AUC"), ("clsacc", "CLSACC"), ("nmi", "NMI")):
            value = getattr(self, key)
            if value is not None:
                out[label] = value
        return out


def stratified_folds(y: np.ndarray, folds: int, seed: int) -> FoldPlan:
    """Assign instances to ``folds`` folds, class-proportionally.

    Members of each class are shuffled under ``seed`` and dealt round
    robin, so per-fold class counts deviate from exact proportionality by
    less than one instance.  Every class must have at least ``folds``
    members.
    """
    y = np.asarray(y)
    if folds < 2:
        raise ValueError(f"cross-validation needs at least 2 folds, got {folds}")
    rng = np.random.default_rng(seed)
    assignment = np.full(y.shape[0], -1, dtype=np.int64)
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.shape[0] < folds:
            raise ValueError(
                f"class {cls} has {members.shape[0]} members, fewer than {folds} folds"
            )
        rng.shuffle(members)
        assignment[members] = np.arange(members.shape[0]) % folds
    return FoldPlan(assignment=assignment, n_folds=folds)


def rf_train_predict(
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    trees: int = 100,
    seed: int = 0,
    *,
    n_classes: int | None = None,
    bootstrap: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Fit a random forest and return (predicted labels, per-class vote fractions).

    CART trees with Gini impurity, n-of-n bootstrap resampling,
    ``ceil(sqrt(d))`` candidate features per split, grown until leaves are
    pure or singleton.  The score matrix column ``c`` holds the fraction
    of trees voting class ``c``; predictions take the argmax with
    lowest-index tie break.  ``bootstrap=False`` trains every tree on the
    full sample (test hook).
    """
    train_X = np.ascontiguousarray(train_X, dtype=np.float64)
    test_X = np.ascontiguousarray(test_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if train_X.ndim != 2 or train_X.shape[1] < 1:
        raise ValueError("training matrix must have at least 1 feature")
    if np.unique(train_y).shape[0] < 2:
        raise ValueError("training data has a single class; need at least 2")
    if n_classes is None:
        n_classes = int(train_y.max()) + 1
    max_features = math.ceil(math.sqrt(train_X.shape[1]))
    forest = grow_forest(
        train_X, train_y, n_classes, trees, max_features, seed & ((1 << 63) - 1),
        1 if bootstrap else 0,
    )
    votes = forest_votes(*forest[:5], test_X, n_classes)
    scores = votes.astype(np.float64) / trees
    pred = np.argmax(scores, axis=1).astype(np.int64)
    return pred, scores


def accuracy(pred, truth) -> float:
    """Fraction of predictions equal to the truth."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size < 1:
        raise ValueError(f"need equal non-empty label vectors, got {pred.shape} vs {truth.shape}")
    return float(np.mean(pred == truth))


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    # Mann-Whitney form: ties contribute half a concordant pair
    ranks = scipy.stats.rankdata(scores)
    n_pos = int(positive.sum())
    n_neg = positive.shape[0] - n_pos
    rank_sum = float(ranks[positive].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auc(scores: np.ndarray, truth) -> float:
    """Area under the ROC curve from per-class score columns.

    Binary problems reduce to the rank-based Mann-Whitney statistic with
    ties counted half; multiclass is the unweighted mean of one-vs-rest
    AUCs over the classes present in ``truth``.  One-vs-rest splits with
    no positives or no negatives are skipped; if every split is skipped
    the input is degenerate and an error is raised.
    """
    truth = np.asarray(truth)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = np.column_stack([-scores, scores])
    if scores.shape[0] != truth.shape[0]:
        raise ValueError(
            f"scores rows ({scores.shape[0]}) must match truth length ({truth.shape[0]})"
        )
    present = np.unique(truth)
    if present.shape[0] < 2:
        raise ValueError("AUC needs at least 2 classes present in truth")
    values = []
    for cls in present:
        positive = truth == cls
        n_pos = int(positive.sum())
        if n_pos == 0 or n_pos == truth.shape[0]:
            continue
        values.append(_binary_auc(scores[:, int(cls)], positive))
    if not values:
        raise ValueError("every one-vs-rest split was degenerate")
    return float(np.mean(values))


def kmeans(X: np.ndarray, k: int, seed: int, max_iter: int = 300) -> KMeansResult:
    """Seeded k-means (k-means++ then Lloyd to an assignment fixpoint)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must be in [1, {X.shape[0]}], got {k}")
    labels, centers, inertia, n_iter, trace = kmeans_fit(
        X, k, seed & ((1 << 63) - 1), max_iter
    )
    return KMeansResult(
        assignments=labels,
        centers=centers,
        inertia=float(inertia),
        n_iter=int(n_iter),
        inertia_trace=trace,
    )


def hungarian(cost: np.ndarray) -> Assignment:
    """Minimum-cost injective assignment of rows to columns.

    Rectangular inputs are zero-padded to square; assignments landing in
    the padding are dropped, leaving an injective mapping on the smaller
    side.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost matrix must be 2-dimensional and non-empty")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    n_rows, n_cols = cost.shape
    size = max(n_rows, n_cols)
    padded = np.zeros((size, size))
    padded[:n_rows, :n_cols] = cost
    rows, cols = scipy.optimize.linear_sum_assignment(padded)
    mapping = {}
    total = 0.0
    for r, c in zip(rows, cols):
        if r < n_rows and c < n_cols:
            mapping[int(r)] = int(c)
            total += cost[r, c]
    return Assignment(mapping=mapping, total_cost=float(total))


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a_ids, a_idx = np.unique(a, return_inverse=True)
    b_ids, b_idx = np.unique(b, return_inverse=True)
    table = np.zeros((a_ids.shape[0], b_ids.shape[0]), dtype=np.int64)
    np.add.at(table, (a_idx, b_idx), 1)
    return table


def clustering_accuracy(clusters, truth) -> float:
    """Best-case fraction of instances whose cluster maps onto their label.

    The cluster-to-label mapping maximizing matched instances is found by
    minimum-cost assignment on the negated contingency counts.
    """
    clusters = np.asarray(clusters)
    truth = np.asarray(truth)
    if clusters.shape != truth.shape or clusters.size < 1:
        raise ValueError(
            f"need equal non-empty label vectors, got {clusters.shape} vs {truth.shape}"
        )
    table = _contingency(clusters, truth)
    assignment = hungarian(-table.astype(np.float64))
    matched = -assignment.total_cost
    return float(matched) / clusters.shape[0]


def nmi(clusters, truth) -> float:
    """Normalized mutual information between two labelings.

    Mutual information and entropies use natural logarithms on the joint
    contingency table; normalization divides by the geometric mean of the
    two entropies.  If either entropy is zero the value is 1.0 when the
    two labelings induce the same partition and 0.0 otherwise.
    """
    clusters = np.asarray(clusters)
    truth = np.asarray(truth)
    if clusters.shape != truth.shape or clusters.size < 1:
        raise ValueError(
            f"need equal non-empty label vectors, got {clusters.shape} vs {truth.shape}"
        )
    table = _contingency(clusters, truth).astype(np.float64)
    n = table.sum()
    p_joint = table / n
    p_rows = p_joint.sum(axis=1)
    p_cols = p_joint.sum(axis=0)
    h_rows = -np.sum(p_rows[p_rows > 0] * np.log(p_rows[p_rows > 0]))
    h_cols = -np.sum(p_cols[p_cols > 0] * np.log(p_cols[p_cols > 0]))
    if h_rows == 0.0 or h_cols == 0.0:
        # same partition iff each row and each column has one nonzero block
        nonzero = table > 0
        identical = np.all(nonzero.sum(axis=0) == 1) and np.all(nonzero.sum(axis=1) == 1)
        return 1.0 if identical else 0.0
    mask = p_joint > 0
    mi = np.sum(p_joint[mask] * np.log(p_joint[mask] / np.outer(p_rows, p_cols)[mask]))
    return float(min(1.0, max(0.0, mi / math.sqrt(h_rows * h_cols))))


def evaluate_supervised(
    ds: Dataset,
    subset: np.ndarray,
    seed: int,
    *,
    folds: int = 5,
    trees: int = 100,
) -> DownstreamScores:
    """Cross-validated forest performance on the given feature columns.

    Returns per-fold accuracy and macro AUC plus their means.  The fold
    plan and per-fold forest seeds all derive from ``seed``.
    """
    y = ds.require_labels()
    subset = np.asarray(subset, dtype=np.int64)
    plan = stratified_folds(y, folds, derive_seed(seed, "folds"))
    Xs = ds.X[:, subset]
    accs = []
    aucs = []
    n_classes = ds.n_classes
    for fold in range(folds):
        train, test = plan.train_test(fold)
        pred, scores = rf_train_predict(
            Xs[train],
            y[train],
            Xs[test],
            trees=trees,
            seed=derive_seed(seed, "rf", fold),
            n_classes=n_classes,
        )
        accs.append(accuracy(pred, y[test]))
        aucs.append(auc(scores, y[test]))
    return DownstreamScores(
        acc=float(np.mean(accs)),
        auc=float(np.mean(aucs)),
        raw={"ACC": tuple(accs), "AUC": tuple(aucs)},
    )


def evaluate_unsupervised(
    ds: Dataset,
    subset: np.ndarray,
    seed: int,
    *,
    runs: int = 10,
    max_iter: int = 300,
) -> DownstreamScores:
    """Repeated k-means quality on the given feature columns.

    ``k`` equals the number of ground-truth classes; ``runs`` independent
    seeded restarts are each scored by clustering accuracy and NMI, and
    the means are reported.
    """
    y = ds.require_labels()
    subset = np.asarray(subset, dtype=np.int64)
    Xs = np.ascontiguousarray(ds.X[:, subset])
    k = ds.n_classes
    clsaccs = []
    nmis = []
    for run in range(runs):
        result = kmeans(Xs, k, derive_seed(seed, "kmeans", run), max_iter=max_iter)
        clsaccs.append(clustering_accuracy(result.assignments, y))
        nmis.append(nmi(result.assignments, y))
    return DownstreamScores(
        clsacc=float(np.mean(clsaccs)),
        nmi=float(np.mean(nmis)),
        raw={"CLSACC": tuple(clsaccs), "NMI": tuple(nmis)},
    )


class VoteForestClassifier(BaseEstimator, ClassifierMixin):
    """Estimator-style wrapper around :func:`rf_train_predict`'s forest.

    Parameters
    ----------
    trees : int
        Number of CART trees.
    seed : int
        Seeds bootstraps and per-node feature subsampling.
    bootstrap : bool
        Train each tree on an n-of-n resample (the default) or on the
        full sample.
    """

    def __init__(self, trees: int = 100, seed: int = 0, bootstrap: bool = True):
        self.trees = trees
        self.seed = seed
        self.bootstrap = bootstrap

    def fit(self, X, y):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] < 2:
            raise ValueError("training data has a single class; need at least 2")
        encoded = np.searchsorted(self.classes_, y)
        max_features = math.ceil(math.sqrt(X.shape[1]))
        self._forest = grow_forest(
            X, encoded, self.classes_.shape[0], self.trees, max_features,
            self.seed & ((1 << 63) - 1), 1 if self.bootstrap else 0,
        )
        return self

    def predict_proba(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        votes = forest_votes(*self._forest[:5], X, self.classes_.shape[0])
        return votes.astype(np.float64) / self.trees

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]


class KMeans(BaseEstimator, ClusterMixin):
    """Estimator-style wrapper around :func:`kmeans`."""

    def __init__(self, k: int = 2, seed: int = 0, max_iter: int = 300):
        self.k = k
        self.seed = seed
        self.max_iter = max_iter

    def fit(self, X, y=None):
        result = kmeans(np.asarray(X, dtype=np.float64), self.k, self.seed, self.max_iter)
        self.labels_ = result.assignments
        self.cluster_centers_ = result.centers
        self.inertia_ = result.inertia
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        d2 = (
            np.einsum("ij,ij->i", X, X)[:, None]
            - 2.0 * X @ self.cluster_centers_.T
            + np.einsum("ij,ij->i", self.cluster_centers_, self.cluster_centers_)[None, :]
        )
        return np.argmin(d2, axis=1)
