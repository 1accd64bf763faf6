"""Experiment orchestration: fraction sweeps, runtime scaling, persistence.

A sweep evaluates each method's ranking at a grid of selected-feature
counts on both downstream tasks, running the random baseline
``repetitions`` times and retaining its per-k mean/std.  The runtime
benchmark times bare selector runs on growing synthetic data with a
first-over-cap skip rule.  Records persist to an append-only
line-delimited store with a versioned header.
"""

from __future__ import annotations

import dataclasses
import json
import math
import time
from pathlib import Path

import numpy as np

from . import selectors as sel
from .dataio import Dataset, standardize, synth_blobs
from .downstream import evaluate_supervised, evaluate_unsupervised
from .seeds import derive_seed
from .selectors import FeatureRanking, GraphParams, PluginError, top_k
from .stats import RandomBaselineStats

__all__ = [
    "METRICS",
    "BUILTIN_METHODS",
    "ConfigError",
    "StoreFormatError",
    "Config",
    "SweepSpec",
    "RuntimeGrid",
    "EvalRecord",
    "RuntimeRecord",
    "SweepResult",
    "RecordWriter",
    "fraction_to_count",
    "kgrid",
    "parse_config",
    "resolve_methods",
    "run_sweep",
    "run_runtime_bench",
    "save_records",
    "load_records",
    "save_baseline",
    "load_baseline",
    "baseline_path",
]

METRICS = ("ACC", "AUC", "CLSACC", "NMI")
BUILTIN_METHODS = ("random", "variance", "correlation", "laplacian_score", "mcfs")

SCHEMA_NAME = "fsbench-records"
SCHEMA_VERSION = 1

RANDOM_METHOD = "random"


class ConfigError(ValueError):
    """Invalid configuration file or option."""


class StoreFormatError(ValueError):
    """Record store content that violates the schema."""


def fraction_to_count(fraction: float, d: int) -> int:
    """Number of features selected by a fraction of ``d``: half-up, min 1.

    A 1e-9 slack absorbs binary representation error in fractions like
    0.005 * d before rounding.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    k = math.floor(fraction * d + 0.5 + 1e-9)
    return max(1, min(k, d))


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """Fraction grid start, stop (inclusive) and step, all in (0, 1]."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        for label, v in (("start", self.start), ("stop", self.stop), ("step", self.step)):
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{label} must be in (0, 1], got {v}")
        if self.start > self.stop:
            raise ValueError(f"start ({self.start}) must be <= stop ({self.stop})")

    @classmethod
    def full(cls) -> "SweepSpec":
        return cls(start=0.05, stop=1.0, step=0.05)

    @classmethod
    def extreme(cls) -> "SweepSpec":
        return cls(start=0.005, stop=0.10, step=0.005)

    @classmethod
    def from_preset(cls, name: str) -> "SweepSpec":
        key = name.strip().upper()
        if key == "FULL":
            return cls.full()
        if key == "EXTREME":
            return cls.extreme()
        raise ValueError(f"unknown sweep preset {name!r} (expected FULL or EXTREME)")

    def fractions(self) -> list[float]:
        count = math.floor((self.stop - self.start) / self.step + 1e-9) + 1
        return [self.start + i * self.step for i in range(count)]


def kgrid(spec: SweepSpec, d: int) -> list[tuple[float, int]]:
    """(fraction, k) grid points with duplicate k values collapsed.

    Two fractions can round to the same feature count on small d; only
    the first is kept so each (method, k, metric) cell appears once.
    """
    out = []
    seen = set()
    for fraction in spec.fractions():
        k = fraction_to_count(fraction, d)
        if k not in seen:
            seen.add(k)
            out.append((fraction, k))
    return out


@dataclasses.dataclass(frozen=True)
class RuntimeGrid:
    """Size grid for the runtime benchmark.

    One dimension (``varying``) sweeps ``start..stop`` by ``step`` while
    the other stays at ``fixed``.  ``cap_seconds`` is the skip threshold:
    the first measurement exceeding it is recorded, then larger sizes are
    skipped for that method.
    """

    varying: str = "instances"
    fixed: int = 100
    start: int = 1000
    stop: int = 20000
    step: int = 500
    cap_seconds: float = 3600.0

    def __post_init__(self):
        if self.varying not in ("instances", "features"):
            raise ValueError(f"varying must be instances or features, got {self.varying!r}")
        if self.step <= 0 or self.start > self.stop or self.start < 1:
            raise ValueError("grid must be strictly increasing (start <= stop, step > 0)")
        if self.fixed < 2:
            raise ValueError("fixed dimension must be >= 2")
        if not self.cap_seconds > 0:
            raise ValueError("cap_seconds must be positive")

    def values(self) -> list[int]:
        return list(range(self.start, self.stop + 1, self.step))


@dataclasses.dataclass(frozen=True)
class EvalRecord:
    """One sweep measurement (or an explicit failure placeholder).

    ``value`` is None exactly when ``error`` is set.  Runtimes are wall
    clock in milliseconds; selector time covers ranking computation only.
    """

    dataset: str
    method: str
    repetition: int
    fraction: float
    k: int
    metric: str
    value: float | None
    selector_ms: float
    eval_ms: float
    seed: int
    error: str | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.repetition < 0:
            raise ValueError(f"repetition must be >= 0, got {self.repetition}")
        if (self.value is None) != (self.error is not None):
            raise ValueError("value must be None exactly when error is set")
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"metric value must be in [0, 1], got {self.value}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class RuntimeRecord:
    """One runtime-benchmark measurement."""

    method: str
    varying: str
    grid_value: int
    n_instances: int
    n_features: int
    seconds: float
    over_cap: bool
    seed: int

    def __post_init__(self):
        if self.varying not in ("instances", "features"):
            raise ValueError(f"varying must be instances or features, got {self.varying!r}")
        if self.seconds < 0:
            raise ValueError("seconds must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_RECORD_TYPES = {"sweep": EvalRecord, "runtime": RuntimeRecord}
_RECORD_FIELDS = {
    kind: tuple(f.name for f in dataclasses.fields(cls)) for kind, cls in _RECORD_TYPES.items()
}


def _header_line(kind: str) -> str:
    return json.dumps(
        {"kind": kind, "schema": SCHEMA_NAME, "version": SCHEMA_VERSION}, sort_keys=True
    )


class RecordWriter:
    """Single-writer append channel to a record store file."""

    def __init__(self, path: str | Path, kind: str):
        if kind not in _RECORD_TYPES:
            raise ValueError(f"unknown store kind {kind!r}")
        self.path = Path(path)
        self.kind = kind
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", encoding="utf-8")
        if fresh:
            self._fh.write(_header_line(kind) + "\n")

    def write(self, record) -> None:
        if not isinstance(record, _RECORD_TYPES[self.kind]):
            raise TypeError(f"expected a {self.kind} record, got {type(record).__name__}")
        self._fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def save_records(path: str | Path, records, kind: str) -> None:
    with RecordWriter(path, kind) as writer:
        for record in records:
            writer.write(record)


def load_records(path: str | Path) -> tuple[str | None, list]:
    """Read a record store; returns (kind, records).

    A missing or zero-byte store is an empty stream, not an error.  Any
    malformed, truncated or unknown-field line raises
    :class:`StoreFormatError` naming its line number.
    """
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return None, []
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines:
        raise StoreFormatError(f"line {len(lines)}: truncated record (no trailing newline)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError:
        raise StoreFormatError("line 1: invalid header") from None
    if (
        not isinstance(header, dict)
        or header.get("schema") != SCHEMA_NAME
        or "kind" not in header
    ):
        raise StoreFormatError("line 1: missing or foreign schema header")
    if header.get("version") != SCHEMA_VERSION:
        raise StoreFormatError(
            f"line 1: unsupported schema version {header.get('version')!r}"
        )
    kind = header["kind"]
    if kind not in _RECORD_TYPES:
        raise StoreFormatError(f"line 1: unknown store kind {kind!r}")
    cls = _RECORD_TYPES[kind]
    fields = set(_RECORD_FIELDS[kind])
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            payload = json.loads(line)
        except json.JSONDecodeError:
            raise StoreFormatError(f"line {lineno}: truncated or invalid record") from None
        if not isinstance(payload, dict):
            raise StoreFormatError(f"line {lineno}: record must be an object")
        unknown = set(payload) - fields
        if unknown:
            raise StoreFormatError(
                f"line {lineno}: unknown field(s) {sorted(unknown)}"
            )
        missing = fields - set(payload)
        if missing:
            raise StoreFormatError(f"line {lineno}: missing field(s) {sorted(missing)}")
        try:
            records.append(cls(**payload))
        except (TypeError, ValueError) as exc:
            raise StoreFormatError(f"line {lineno}: {exc}") from None
    return kind, records


def baseline_path(store: str | Path) -> Path:
    return Path(str(store) + ".baseline.json")


def save_baseline(store: str | Path, per_dataset: dict[str, dict[str, RandomBaselineStats]]) -> None:
    """Persist random-baseline stats alongside a sweep store."""
    payload = {
        ds: {
            metric: {
                "xs": stats.xs.tolist(),
                "mean": stats.mean.tolist(),
                "std": stats.std.tolist(),
                "repetitions": stats.repetitions,
            }
            for metric, stats in metrics.items()
        }
        for ds, metrics in per_dataset.items()
    }
    baseline_path(store).write_text(
        json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )


def load_baseline(store: str | Path) -> dict[str, dict[str, RandomBaselineStats]]:
    path = baseline_path(store)
    if not path.exists():
        return {}
    payload = json.loads(path.read_text(encoding="utf-8"))
    out: dict[str, dict[str, RandomBaselineStats]] = {}
    for ds, metrics in payload.items():
        out[ds] = {
            metric: RandomBaselineStats(
                xs=np.array(entry["xs"]),
                mean=np.array(entry["mean"]),
                std=np.array(entry["std"]),
                repetitions=int(entry["repetitions"]),
            )
            for metric, entry in metrics.items()
        }
    return out


@dataclasses.dataclass
class Config:
    """Run configuration; every field has a working default.

    See the repository README for the config-file grammar (flat
    ``key = value`` lines).
    """

    datasets_dir: Path = Path(".")
    datasets: tuple[str, ...] = ()
    label_column: str = "last"
    methods: tuple[str, ...] = BUILTIN_METHODS
    external: dict = dataclasses.field(default_factory=dict)
    sweep: str = "FULL"
    sweep_start: float | None = None
    sweep_stop: float | None = None
    sweep_step: float | None = None
    repetitions: int = 100
    cv_folds: int = 5
    kmeans_runs: int = 10
    forest_trees: int = 100
    alpha: float = 0.05
    master_seed: int = 0
    k_neighbors: int = 5
    plugin_timeout: float = 60.0
    record_timings: bool = True
    runtime_cap: float = 3600.0
    runtime_varying: str = "instances"
    runtime_fixed: int = 100
    runtime_start: int = 1000
    runtime_stop: int = 20000
    runtime_step: int = 500
    store: Path = Path("records.jsonl")
    out_dir: Path = Path("reports")

    def sweep_spec(self) -> SweepSpec:
        explicit = (self.sweep_start, self.sweep_stop, self.sweep_step)
        if any(v is not None for v in explicit):
            if any(v is None for v in explicit):
                raise ConfigError(
                    "sweep_start, sweep_stop and sweep_step must be given together"
                )
            return SweepSpec(start=self.sweep_start, stop=self.sweep_stop, step=self.sweep_step)
        return SweepSpec.from_preset(self.sweep)

    def runtime_grid(self) -> RuntimeGrid:
        return RuntimeGrid(
            varying=self.runtime_varying,
            fixed=self.runtime_fixed,
            start=self.runtime_start,
            stop=self.runtime_stop,
            step=self.runtime_step,
            cap_seconds=self.runtime_cap,
        )

    def graph_params(self) -> GraphParams:
        return GraphParams(k_neighbors=self.k_neighbors)


def _parse_bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


_CONFIG_PARSERS = {
    "datasets_dir": Path,
    "datasets": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    "label_column": str.strip,
    "methods": lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    "sweep": str.strip,
    "sweep_start": float,
    "sweep_stop": float,
    "sweep_step": float,
    "repetitions": int,
    "cv_folds": int,
    "kmeans_runs": int,
    "forest_trees": int,
    "alpha": float,
    "master_seed": int,
    "k_neighbors": int,
    "plugin_timeout": float,
    "record_timings": _parse_bool,
    "runtime_cap": float,
    "runtime_varying": str.strip,
    "runtime_fixed": int,
    "runtime_start": int,
    "runtime_stop": int,
    "runtime_step": int,
    "store": Path,
    "out_dir": Path,
}


def parse_config(path: str | Path) -> Config:
    """Parse a flat ``key = value`` config file.

    Blank lines and lines starting with ``#`` are skipped.  Keys named
    ``method.NAME`` register external selector commands; every other key
    must match a :class:`Config` field.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    config = Config()
    external: dict[str, str] = {}
    for lineno, rawline in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = rawline.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {rawline!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key.startswith("method."):
            name = key[len("method."):].strip()
            if not name or not value:
                raise ConfigError(f"{path}:{lineno}: external method needs a name and command")
            external[name] = value
            continue
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            setattr(config, key, parser(value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    config.external = external
    return config


def resolve_methods(names, config: Config, overrides: dict | None = None) -> list[tuple[str, object]]:
    """Map method names to selector callables, failing fast on unknowns.

    Each callable has signature ``fn(ds_std, ds_raw, seed) -> FeatureRanking``.
    The variance method receives the raw (pre-standardization) matrix;
    everything else sees the standardized one.  ``overrides`` lets tests
    inject stub selectors under arbitrary names.
    """
    gp = config.graph_params()
    resolved = []
    for name in names:
        if overrides and name in overrides:
            resolved.append((name, overrides[name]))
        elif name == "random":
            resolved.append((name, lambda std, raw, seed: sel.random_ranking(std.d, seed)))
        elif name == "variance":
            resolved.append((name, lambda std, raw, seed: sel.variance_ranking(raw)))
        elif name == "correlation":
            resolved.append((name, lambda std, raw, seed: sel.correlation_ranking(std)))
        elif name == "laplacian_score":
            resolved.append(
                (name, lambda std, raw, seed, gp=gp: sel.laplacian_score_ranking(std, gp))
            )
        elif name == "mcfs":
            resolved.append((name, lambda std, raw, seed, gp=gp: sel.mcfs_ranking(std, gp)))
        elif name in config.external:
            command = config.external[name]
            resolved.append(
                (
                    name,
                    lambda std, raw, seed, command=command, name=name: sel.external_ranking(
                        std, command, timeout=config.plugin_timeout, name=name
                    ),
                )
            )
        else:
            raise ConfigError(f"unknown method {name!r}")
    return resolved


@dataclasses.dataclass
class SweepResult:
    records: list
    baseline: dict[str, RandomBaselineStats]
    grid: list[tuple[float, int]]


def run_sweep(
    ds: Dataset,
    methods,
    spec: SweepSpec,
    config: Config,
    writer: RecordWriter | None = None,
    progress=None,
    overrides: dict | None = None,
) -> SweepResult:
    """Evaluate every method over the fraction grid of one dataset.

    Deterministic methods rank once; the random baseline ranks
    ``config.repetitions`` times and its per-k mean/std per metric are
    returned as :class:`RandomBaselineStats`.  Rankings are computed once
    per repetition and shared by all grid points.  A selector failure
    produces one failure record per grid cell instead of aborting.
    Records stream to ``writer`` (when given) in a fixed deterministic
    order.
    """
    if ds.y is None:
        raise ValueError(f"dataset {ds.name!r} has no labels; sweeps need them")
    resolved = resolve_methods(methods, config, overrides)
    std_ds, _ = standardize(ds)
    grid = kgrid(spec, ds.d)
    eval_seed = derive_seed(config.master_seed, "eval", ds.name)

    records: list[EvalRecord] = []
    baseline_values: dict[str, np.ndarray] = {}
    random_reps = 0

    def emit(record: EvalRecord):
        records.append(record)
        if writer is not None:
            writer.write(record)

    for name, fn in resolved:
        reps = config.repetitions if name == RANDOM_METHOD else 1
        if name == RANDOM_METHOD:
            random_reps = reps
            baseline_values = {
                metric: np.zeros((reps, len(grid))) for metric in METRICS
            }
        for rep in range(reps):
            if progress is not None:
                progress(f"{ds.name}: {name} repetition {rep + 1}/{reps}")
            seed = derive_seed(config.master_seed, "rank", ds.name, name, rep)
            t0 = time.perf_counter()
            try:
                ranking: FeatureRanking | None = fn(std_ds, ds, seed)
                failure = None
            except PluginError as exc:
                ranking = None
                failure = str(exc)
            selector_ms = (time.perf_counter() - t0) * 1000.0
            if not config.record_timings:
                selector_ms = 0.0

            for gi, (fraction, k) in enumerate(grid):
                if ranking is None:
                    for metric in METRICS:
                        emit(
                            EvalRecord(
                                dataset=ds.name, method=name, repetition=rep,
                                fraction=fraction, k=k, metric=metric, value=None,
                                selector_ms=selector_ms, eval_ms=0.0, seed=seed,
                                error=failure,
                            )
                        )
                    continue
                subset = top_k(ranking, k)
                t0 = time.perf_counter()
                sup = evaluate_supervised(
                    std_ds, subset, eval_seed,
                    folds=config.cv_folds, trees=config.forest_trees,
                )
                sup_ms = (time.perf_counter() - t0) * 1000.0
                t0 = time.perf_counter()
                unsup = evaluate_unsupervised(
                    std_ds, subset, eval_seed, runs=config.kmeans_runs
                )
                unsup_ms = (time.perf_counter() - t0) * 1000.0
                if not config.record_timings:
                    sup_ms = unsup_ms = 0.0
                for metric, value, eval_ms in (
                    ("ACC", sup.acc, sup_ms),
                    ("AUC", sup.auc, sup_ms),
                    ("CLSACC", unsup.clsacc, unsup_ms),
                    ("NMI", unsup.nmi, unsup_ms),
                ):
                    emit(
                        EvalRecord(
                            dataset=ds.name, method=name, repetition=rep,
                            fraction=fraction, k=k, metric=metric, value=value,
                            selector_ms=selector_ms, eval_ms=eval_ms, seed=seed,
                        )
                    )
                    if name == RANDOM_METHOD:
                        baseline_values[metric][rep, gi] = value

    baseline = {}
    if random_reps > 0:
        ks = np.array([k for _, k in grid], dtype=np.float64)
        for metric in METRICS:
            values = baseline_values[metric]
            baseline[metric] = RandomBaselineStats(
                xs=ks,
                mean=values.mean(axis=0),
                std=values.std(axis=0),
                repetitions=random_reps,
            )
    return SweepResult(records=records, baseline=baseline, grid=grid)


def run_runtime_bench(
    methods,
    grid: RuntimeGrid,
    seed: int,
    config: Config | None = None,
    writer: RecordWriter | None = None,
    progress=None,
    overrides: dict | None = None,
) -> list[RuntimeRecord]:
    """Time bare selector runs on synthetic data of growing size.

    For each method the grid is walked in order; every run is timed to
    completion, and the first measurement over ``grid.cap_seconds`` is
    still recorded (flagged over-cap) before all larger sizes are skipped
    for that method.  Standardization and generation are excluded from
    the timing.
    """
    if config is None:
        config = Config()
    resolved = resolve_methods(methods, config, overrides)
    records: list[RuntimeRecord] = []
    for name, fn in resolved:
        for g in grid.values():
            if grid.varying == "instances":
                n, d = g, grid.fixed
            else:
                n, d = grid.fixed, g
            if progress is not None:
                progress(f"runtime: {name} at {grid.varying}={g}")
            ds = synth_blobs(
                n, d, 2, min(5, d), derive_seed(seed, "runtime-data", grid.varying, g)
            )
            std_ds, _ = standardize(ds)
            rank_seed = derive_seed(seed, "runtime-rank", name, g)
            t0 = time.perf_counter()
            fn(std_ds, ds, rank_seed)
            seconds = time.perf_counter() - t0
            record = RuntimeRecord(
                method=name, varying=grid.varying, grid_value=g,
                n_instances=n, n_features=d, seconds=seconds,
                over_cap=seconds > grid.cap_seconds, seed=rank_seed,
            )
            records.append(record)
            if writer is not None:
                writer.write(record)
            if record.over_cap:
                break
    return records


def plan_cell_count(d: int, methods, spec: SweepSpec, config: Config) -> int:
    """Number of records a sweep over one dataset will produce."""
    grid = kgrid(spec, d)
    total = 0
    for name in methods:
        reps = config.repetitions if name == RANDOM_METHOD else 1
        total += reps * len(grid) * len(METRICS)
    return total
