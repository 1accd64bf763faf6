"""Command-line entry point.

Subcommands: ``run`` (fraction sweep), ``runtime`` (scaling benchmark),
``analyze`` (tables from a store), ``plot`` (SVG charts from a store) and
``synth`` (synthetic dataset generator).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataio, harness, report
from .harness import Config, ConfigError, RecordWriter, StoreFormatError


def _load_config(args) -> Config:
    if getattr(args, "config", None):
        config = harness.parse_config(args.config)
    else:
        config = Config()
    if getattr(args, "store", None):
        config.store = Path(args.store)
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
    return config


def _dataset_paths(config: Config) -> list[Path]:
    if not config.datasets:
        raise ConfigError("config lists no datasets")
    paths = []
    for entry in config.datasets:
        p = Path(entry)
        if not p.is_absolute():
            p = config.datasets_dir / p
        if not p.exists():
            raise ConfigError(f"dataset file not found: {p}")
        paths.append(p)
    return paths


def _load_dataset(path: Path, config: Config) -> dataio.Dataset:
    selector = config.label_column
    if selector == "none":
        return dataio.load_csv(path)
    if selector == "last":
        return dataio.load_csv(path, label_column=-1)
    try:
        return dataio.load_csv(path, label_column=int(selector))
    except ValueError:
        pass
    # a non-integer selector is a column name, which implies a header row
    return dataio.load_csv(path, label_column=selector, has_header=True)


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def cmd_run(args) -> int:
    config = _load_config(args)
    spec = config.sweep_spec()
    paths = _dataset_paths(config)
    datasets = [_load_dataset(p, config) for p in paths]

    if args.dry_run:
        total = 0
        for ds in datasets:
            cells = harness.plan_cell_count(ds.d, config.methods, spec, config)
            print(f"{ds.name}: {cells} records planned")
            total += cells
        print(f"total: {total} records over {len(datasets)} dataset(s); nothing written")
        return 0

    store = Path(config.store)
    if store.exists() and store.stat().st_size > 0:
        raise ConfigError(
            f"store {store} already holds records; point --store at a fresh file"
        )
    baselines: dict[str, dict] = {}
    all_records = []
    with RecordWriter(store, "sweep") as writer:
        for ds in datasets:
            result = harness.run_sweep(
                ds, config.methods, spec, config, writer=writer, progress=_progress
            )
            all_records.extend(result.records)
            if result.baseline:
                baselines[ds.name] = result.baseline
    if baselines:
        harness.save_baseline(store, baselines)
    print(f"wrote {len(all_records)} records to {store}")

    summary = report.method_summary(all_records)
    if summary:
        print("method,metric,mean_fsdem")
        for row in summary:
            print(f"{row['method']},{row['metric']},{report.format_cell(row['mean_fsdem'])}")
    return 0


def cmd_runtime(args) -> int:
    config = _load_config(args)
    grid = config.runtime_grid()
    store = Path(config.store)
    if store.exists() and store.stat().st_size > 0:
        raise ConfigError(
            f"store {store} already holds records; point --store at a fresh file"
        )
    with RecordWriter(store, "runtime") as writer:
        records = harness.run_runtime_bench(
            config.methods, grid, config.master_seed, config,
            writer=writer, progress=_progress,
        )
    print(f"wrote {len(records)} runtime records to {store}")
    return 0


def _store_and_outputs(args, config: Config) -> tuple[Path, Path, float]:
    """Resolve store path, output dir and alpha from flags with config fallback."""
    if getattr(args, "store", None):
        store = Path(args.store)
    elif getattr(args, "config", None):
        store = Path(config.store)
    else:
        raise ConfigError("give --store or a --config that names one")
    out_dir = Path(args.out) if args.out else Path(config.out_dir)
    alpha = args.alpha if args.alpha is not None else config.alpha
    return store, out_dir, alpha


def cmd_analyze(args) -> int:
    config = _load_config(args)
    store, out_dir, alpha = _store_and_outputs(args, config)
    result = report.analyze(
        store,
        out_dir,
        alpha=alpha,
        metrics=[args.metric] if args.metric else None,
        datasets=[args.dataset] if args.dataset else None,
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for path in result.paths:
        print(path)
    return 0


def cmd_plot(args) -> int:
    config = _load_config(args)
    store, out_dir, alpha = _store_and_outputs(args, config)
    result = report.make_plots(
        store,
        out_dir,
        kinds=[args.kind] if args.kind else None,
        metrics=[args.metric] if args.metric else None,
        datasets=[args.dataset] if args.dataset else None,
        alpha=alpha,
        cap_seconds=config.runtime_cap,
    )
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for path in result.paths:
        print(path)
    return 0


def cmd_synth(args) -> int:
    ds = dataio.synth_blobs(
        args.n, args.d, args.classes, args.informative, args.seed
    )
    dataio.write_csv(ds, args.out)
    print(f"wrote {ds.n}x{ds.d} dataset with {args.classes} classes to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsbench",
        description="Benchmark feature-selection methods against a random baseline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the fraction-sweep evaluation")
    p_run.add_argument("--config", required=True, help="path to a key = value config file")
    p_run.add_argument("--store", help="record store path (overrides config)")
    p_run.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_run.add_argument(
        "--dry-run", action="store_true", help="print the planned record count and exit"
    )
    p_run.set_defaults(func=cmd_run)

    p_rt = sub.add_parser("runtime", help="run the runtime-scaling benchmark")
    p_rt.add_argument("--config", required=True)
    p_rt.add_argument("--store", help="record store path (overrides config)")
    p_rt.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_rt.set_defaults(func=cmd_runtime)

    p_an = sub.add_parser("analyze", help="write FSDEM/Z-score/rank tables from a store")
    p_an.add_argument("--config", help="config file supplying store/out/alpha defaults")
    p_an.add_argument("--store", help="record store path (overrides config)")
    p_an.add_argument("--out", help="output directory (default from config, else reports)")
    p_an.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    p_an.add_argument("--metric", help="restrict to one metric")
    p_an.add_argument("--dataset", help="restrict to one dataset")
    p_an.set_defaults(func=cmd_analyze)

    p_pl = sub.add_parser("plot", help="render SVG charts from a store")
    p_pl.add_argument("--config", help="config file supplying store/out/alpha defaults")
    p_pl.add_argument("--store", help="record store path (overrides config)")
    p_pl.add_argument("--out", help="output directory (default from config, else reports)")
    p_pl.add_argument("--kind", choices=["sweep", "zscore", "runtime", "cdd"])
    p_pl.add_argument("--metric", help="restrict to one metric")
    p_pl.add_argument("--dataset", help="restrict to one dataset")
    p_pl.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    p_pl.set_defaults(func=cmd_plot)

    p_sy = sub.add_parser("synth", help="generate a synthetic labeled dataset CSV")
    p_sy.add_argument("--out", required=True)
    p_sy.add_argument("--n", type=int, required=True, help="instances")
    p_sy.add_argument("--d", type=int, required=True, help="features")
    p_sy.add_argument("--classes", type=int, default=2)
    p_sy.add_argument("--informative", type=int, default=1)
    p_sy.add_argument("--seed", type=int, default=0)
    p_sy.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StoreFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
