"""Command-line entry point.

Subcommands: run-grid, verify, partition, train, emit-plots.
Exit codes: 0 success (and 15/15 verification for run-grid/verify),
2 verification failure, 64 usage or invalid config, 1 any other error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .config import config_from_dict, config_to_dict, load_config
from .data import SynthSpec
from .errors import ConfigError, FedNBError
from .experiment import (
    GridResult,
    emit_plot_data,
    emit_results_csv,
    load_results_csv,
    materialize_dataset,
    run_grid,
    verify,
)
from .governance import IccPrior
from .local_model import fit_hybrid, save_model
from .mog import MoGEnsemble
from .partition import dirichlet_partition, jsd_heterogeneity
from .weights import OptimizationTrace

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFY_FAIL = 2
EXIT_USAGE = 64

GRID_BUNDLE = "grid.json"
RESULTS_CSV = "results.csv"


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise FedNBError(f"--set expects key=value, got {pair!r}")
        key, val = pair.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _save_bundle(result: GridResult, out_dir: str) -> None:
    bundle = {
        "config": config_to_dict(result.config),
        "scores_ok": result.scores_ok,
        "traces": {
            f"{ai},{rep}": trace.to_dict() for (ai, rep), trace in result.traces.items()
        },
        "partitions": {
            f"{ai},{rep}": counts.tolist() for (ai, rep), counts in result.partitions.items()
        },
        "runtimes_ms": [r.runtime_ms for r in result.records],
    }
    with open(os.path.join(out_dir, GRID_BUNDLE), "w", encoding="utf-8") as fh:
        json.dump(bundle, fh)


def _load_bundle(results_dir: str) -> GridResult:
    csv_path = os.path.join(results_dir, RESULTS_CSV)
    bundle_path = os.path.join(results_dir, GRID_BUNDLE)
    records = load_results_csv(csv_path)
    with open(bundle_path, encoding="utf-8") as fh:
        bundle = json.load(fh)
    config = config_from_dict(bundle["config"])
    traces = {}
    for key, td in bundle["traces"].items():
        ai, rep = key.split(",")
        traces[(int(ai), int(rep))] = OptimizationTrace.from_dict(td)
    partitions = {}
    for key, counts in bundle["partitions"].items():
        ai, rep = key.split(",")
        partitions[(int(ai), int(rep))] = np.array(counts, dtype=np.int64)
    return GridResult(config, records, traces, partitions, bool(bundle["scores_ok"]))


def cmd_run_grid(args) -> int:
    config = load_config(args.config, _parse_overrides(args.set))
    os.makedirs(args.out, exist_ok=True)
    result = run_grid(config)
    emit_results_csv(result.records, os.path.join(args.out, RESULTS_CSV))
    _save_bundle(result, args.out)

    # plot data: densities from the last cell's local models
    dataset, _ = materialize_dataset(config)
    ensemble = _refit_ensemble(config, dataset)
    prior = IccPrior.from_profiles(config.profiles)
    emit_plot_data(
        result.records,
        ensemble,
        os.path.join(args.out, "plots"),
        node_names=[p.name for p in config.profiles],
        prior=prior.normalized,
    )

    report = verify(result)
    _write_report(report, args.out)
    print(report.to_text())
    return EXIT_OK if report.all_passed else EXIT_VERIFY_FAIL


def _refit_ensemble(config, dataset):
    from .partition import SplitConfig, stratified_split
    from .data import degrade_copy
    from .experiment import _cell_seeds

    alpha = config.alphas[-1]
    rep = config.reps - 1
    split_seed, part_seed, degr_seed, _ = _cell_seeds(config, len(config.alphas) - 1, rep)
    f = config.split_fracs
    train, _, _ = stratified_split(dataset, SplitConfig(f[0], f[1], f[2], seed=split_seed))
    part = dirichlet_partition(train.labels, config.k, alpha, part_seed)
    models = []
    for node, ix in enumerate(part.node_indices):
        local = train.subset(ix)
        if isinstance(config.source, SynthSpec):
            local = degrade_copy(local, config.source.node_noise[node], degr_seed + node)
        models.append(fit_hybrid(local))
    return MoGEnsemble(models, np.full(config.k, 1.0 / config.k))


def _write_report(report, out_dir: str) -> None:
    with open(os.path.join(out_dir, "verification.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text() + "\n")
    with open(os.path.join(out_dir, "verification.kv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_kv() + "\n")


def cmd_verify(args) -> int:
    try:
        result = _load_bundle(args.results)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: cannot load results from {args.results}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    report = verify(result, csv_quantized=True)
    print(report.to_text())
    return EXIT_OK if report.all_passed else EXIT_VERIFY_FAIL


def cmd_partition(args) -> int:
    config = load_config(args.config, _parse_overrides(args.set))
    dataset, _ = materialize_dataset(config)
    part = dirichlet_partition(dataset.labels, config.k, args.alpha, args.seed)
    counts = part.class_counts(dataset.labels, dataset.schema.n_classes)
    jsd = jsd_heterogeneity(counts) if config.k >= 2 else 0.0
    lines = ["node\tsize\t" + "\t".join(f"class_{c}" for c in range(counts.shape[1]))]
    for i, p in enumerate(config.profiles):
        lines.append(f"{p.name}\t{len(part.node_indices[i])}\t" + "\t".join(map(str, counts[i])))
    lines.append(f"jsd\t{jsd:.6f}")
    out = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(out)
    else:
        print(out, end="")
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_config(args.config, _parse_overrides(args.set))
    dataset, _ = materialize_dataset(config)
    model = fit_hybrid(dataset)
    save_model(model, args.out)
    print(f"model written to {args.out}")
    return EXIT_OK


def cmd_emit_plots(args) -> int:
    records = load_results_csv(os.path.join(args.results, RESULTS_CSV))
    ensemble = None
    node_names = None
    prior = None
    bundle_path = os.path.join(args.results, GRID_BUNDLE)
    if os.path.exists(bundle_path):
        with open(bundle_path, encoding="utf-8") as fh:
            config = config_from_dict(json.load(fh)["config"])
        node_names = [p.name for p in config.profiles]
        prior = IccPrior.from_profiles(config.profiles).normalized
        dataset, _ = materialize_dataset(config)
        ensemble = _refit_ensemble(config, dataset)
    emit_plot_data(records, ensemble, args.out, node_names=node_names, prior=prior)
    print(f"plot data written to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fednb", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override seed, alphas, reps, lambda or delta")

    p = sub.add_parser("run-grid", help="run the full grid, emit results and verify")
    common(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_run_grid)

    p = sub.add_parser("verify", help="re-run the 15-check protocol on emitted results")
    p.add_argument("--results", required=True, help="directory written by run-grid")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("partition", help="partition the dataset once and report counts")
    common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("train", help="fit one pooled hybrid model and serialize it")
    common(p)
    p.add_argument("--out", required=True, help="model output file (JSON)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("emit-plots", help="emit plot-ready TSV files from saved results")
    p.add_argument("--results", required=True, help="directory written by run-grid")
    p.add_argument("--out", required=True, help="plot data output directory")
    p.set_defaults(func=cmd_emit_plots)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FedNBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE if isinstance(exc, ConfigError) else EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
