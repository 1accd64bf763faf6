"""fsbench: benchmark feature-selection methods against a random baseline.

The pipeline: rank features (random baseline, variance, correlation
redundancy, Laplacian Score, multi-cluster selection, or an external
plugin), sweep a grid of selected-feature fractions, evaluate each subset
with a cross-validated random forest (accuracy, AUC) and repeated k-means
(clustering accuracy, NMI), then aggregate into curve means, Z-scores
against the random baseline and critical-difference comparisons, with
deterministic SVG charts.
"""

from .dataio import CsvFormatError, Dataset, load_csv, standardize, synth_blobs, write_csv
from .downstream import (
    KMeans,
    VoteForestClassifier,
    accuracy,
    auc,
    clustering_accuracy,
    evaluate_supervised,
    evaluate_unsupervised,
    hungarian,
    kmeans,
    nmi,
    rf_train_predict,
    stratified_folds,
)
from .harness import (
    Config,
    EvalRecord,
    RuntimeGrid,
    RuntimeRecord,
    SweepSpec,
    fraction_to_count,
    load_records,
    parse_config,
    run_runtime_bench,
    run_sweep,
    save_records,
)
from .seeds import derive_seed
from .selectors import (
    FeatureRanking,
    GraphParams,
    PluginError,
    TopKSelector,
    correlation_ranking,
    external_ranking,
    laplacian_score_ranking,
    mcfs_ranking,
    random_ranking,
    top_k,
    variance_ranking,
)
from .stats import (
    MetricCurve,
    RandomBaselineStats,
    cd_layout,
    fsdem,
    friedman_ranks,
    holm_adjust,
    wilcoxon_signed_rank,
    zscore,
)

__version__ = "0.1.0"

__all__ = [
    "CsvFormatError",
    "Dataset",
    "load_csv",
    "standardize",
    "synth_blobs",
    "write_csv",
    "KMeans",
    "VoteForestClassifier",
    "accuracy",
    "auc",
    "clustering_accuracy",
    "evaluate_supervised",
    "evaluate_unsupervised",
    "hungarian",
    "kmeans",
    "nmi",
    "rf_train_predict",
    "stratified_folds",
    "Config",
    "EvalRecord",
    "RuntimeGrid",
    "RuntimeRecord",
    "SweepSpec",
    "fraction_to_count",
    "load_records",
    "parse_config",
    "run_runtime_bench",
    "run_sweep",
    "save_records",
    "derive_seed",
    "FeatureRanking",
    "GraphParams",
    "PluginError",
    "TopKSelector",
    "correlation_ranking",
    "external_ranking",
    "laplacian_score_ranking",
    "mcfs_ranking",
    "random_ranking",
    "top_k",
    "variance_ranking",
    "MetricCurve",
    "RandomBaselineStats",
    "cd_layout",
    "fsdem",
    "friedman_ranks",
    "holm_adjust",
    "wilcoxon_signed_rank",
    "zscore",
    "__version__",
]
