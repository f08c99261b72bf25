"""Command-line interface for training, evaluation, and analysis runs.

Every subcommand takes --config/--seed/--out; artifacts (model archive,
CSV reports, PGM dumps, summary.txt) land in the output directory. Exit
code is nonzero on any error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import archive as ar
from . import classifier as clf
from . import pipeline as pl
from . import reports
from .config import RunConfig, load_config, save_config
from .discovery import weight_correlation
from .errors import SpikeCnnError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="run configuration file")
    parser.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    parser.add_argument("--out", metavar="DIR", default="run_out",
                        help="output directory (default: run_out)")


def _setup(args) -> tuple[RunConfig, str]:
    config = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    return config, args.out


def _model_path(out_dir: str) -> str:
    return os.path.join(out_dir, "model.scnn")


def _write_summary(out_dir: str, lines: list[str]) -> None:
    path = os.path.join(out_dir, "summary.txt")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def _emit_filter_artifacts(out_dir, archive, report) -> None:
    if report.filter_diagnostics:
        reports.write_filter_diagnostics_csv(
            os.path.join(out_dir, "filter_diagnostics.csv"),
            report.filter_diagnostics)
    reports.dump_filters_pgm(archive.filters, os.path.join(out_dir, "filters.pgm"))


def _emit_correlation_artifacts(out_dir, report) -> None:
    if not report.correlation_reports:
        return
    reports.write_correlation_csv(
        os.path.join(out_dir, "correlation_per_iteration.csv"),
        report.correlation_reports)
    for rep in report.correlation_reports:
        reports.dump_correlation_pgm(
            rep, os.path.join(out_dir, f"correlation_iter{rep.iteration:02d}.pgm"))


def cmd_train_filters(args) -> int:
    config, out_dir = _setup(args)
    dataset = pl.load_dataset(config, "train")
    report = pl.RunReport()
    archive = ar.ModelArchive(config=config)
    archive.filters = pl.stage_train_filters(config, dataset, report)
    archive.mark_complete(ar.STAGE_FILTERS)
    ar.save_model(archive, _model_path(out_dir))
    _emit_filter_artifacts(out_dir, archive, report)
    last = report.filter_diagnostics[-1]
    _write_summary(out_dir, [
        f"trained {config.D} filters on {min(config.filter_images, len(dataset))} images "
        f"x {config.filter_iterations} iterations",
        f"final mean spikes/patch: {last.mean_spikes_per_patch:.3f} "
        f"(target {config.p ** 2 * config.rho if config.D == config.p ** 2 else config.D * config.rho:.2f})",
        f"model: {_model_path(out_dir)}",
    ])
    return 0


def cmd_train_features(args) -> int:
    config, out_dir = _setup(args)
    archive = ar.load_model(_model_path(out_dir))
    archive.require_stage(ar.STAGE_FILTERS)
    dataset = pl.load_dataset(config, "train")
    report = pl.RunReport()
    archive.discovery_weights = pl.stage_train_discovery(
        archive.config, archive.filters, dataset, report)
    archive.mark_complete(ar.STAGE_DISCOVERY)
    ar.save_model(archive, _model_path(out_dir))
    _emit_correlation_artifacts(out_dir, report)
    _write_summary(out_dir, [
        f"trained {archive.config.H} discovery units "
        f"({archive.config.neuron_model} neurons, {archive.config.stdp_rule} STDP)",
        f"final mean |correlation|: {report.correlation_reports[-1].average:.4f}",
        f"model: {_model_path(out_dir)}",
    ])
    return 0


def cmd_train_classifier(args) -> int:
    config, out_dir = _setup(args)
    archive = ar.load_model(_model_path(out_dir))
    archive.require_stage(ar.STAGE_DISCOVERY)
    dataset = pl.load_dataset(config, "train")
    archive.svm = pl.stage_train_classifier(
        archive.config, archive.filters, archive.discovery_weights, dataset)
    archive.mark_complete(ar.STAGE_CLASSIFIER)
    ar.save_model(archive, _model_path(out_dir))
    _write_summary(out_dir, [
        f"trained {archive.config.feature_mode} SVM head "
        f"(lambda={archive.config.svm_lambda}, epochs={archive.config.svm_epochs})",
        f"model: {_model_path(out_dir)}",
    ])
    return 0


def cmd_run_all(args) -> int:
    config, out_dir = _setup(args)
    report = pl.RunReport()
    archive = pl.run_layerwise(config, out_path=_model_path(out_dir),
                               resume=not args.fresh, report=report)
    if report.filter_diagnostics:
        _emit_filter_artifacts(out_dir, archive, report)
    _emit_correlation_artifacts(out_dir, report)
    lines = [f"pipeline complete: {', '.join(archive.completed)}"]
    if config.test_images:
        test_set = pl.load_dataset(config, "test")
        result = pl.evaluate(archive, test_set, config.noise)
        reports.write_confusion_csv(
            os.path.join(out_dir, "confusion.csv"), result.confusion)
        lines.append(f"test accuracy ({result.noise}, {result.n_images} images): "
                     f"{result.accuracy:.4f}")
    _write_summary(out_dir, lines)
    return 0


def cmd_evaluate(args) -> int:
    config, out_dir = _setup(args)
    archive = ar.load_model(_model_path(out_dir))
    test_set = pl.load_dataset(config, "test")
    specs = args.noise if args.noise else ["none"]
    results = pl.evaluate_noise_suite(archive, test_set, specs)
    reports.write_csv(
        os.path.join(out_dir, "evaluation.csv"),
        ["noise", "n_images", "accuracy"],
        [(r.noise, r.n_images, f"{r.accuracy:.4f}") for r in results])
    for r in results:
        reports.write_confusion_csv(
            os.path.join(out_dir, f"confusion_{r.noise.replace(':', '_')}.csv"),
            r.confusion)
    _write_summary(out_dir, [
        f"{r.noise}: accuracy {r.accuracy:.4f} on {r.n_images} images"
        for r in results
    ])
    return 0


def cmd_control_matrix(args) -> int:
    config, out_dir = _setup(args)
    train_set = pl.load_dataset(config, "train")
    test_set = pl.load_dataset(config, "test")
    noise_specs = tuple(args.noise) if args.noise else ()
    rows = pl.control_matrix(config, train_set, test_set, noise_specs=noise_specs)
    header = ["neuron_model", "stdp_rule", "clean_accuracy"]
    header += [f"accuracy_{s.replace(':', '_')}" for s in noise_specs]
    csv_rows = []
    for row in rows:
        csv_rows.append([row.neuron_model, row.stdp_rule, f"{row.accuracy:.4f}"]
                        + [f"{row.noisy[s]:.4f}" for s in noise_specs])
    reports.write_csv(os.path.join(out_dir, "control_matrix.csv"), header, csv_rows)
    _write_summary(out_dir, [
        f"{row.neuron_model:>13} + {row.stdp_rule:<13} accuracy {row.accuracy:.4f}"
        for row in rows
    ])
    return 0


def cmd_analyze_correlations(args) -> int:
    config, out_dir = _setup(args)
    archive = ar.load_model(_model_path(out_dir))
    archive.require_stage(ar.STAGE_DISCOVERY)
    report = weight_correlation(archive.discovery_weights.astype(np.float64))
    reports.write_correlation_matrix_csv(
        os.path.join(out_dir, "correlation_matrix.csv"), report)
    reports.dump_correlation_pgm(
        report, os.path.join(out_dir, "correlation_matrix.pgm"))
    lines = [f"mean |off-diagonal| correlation: {report.average:.4f}"]
    if archive.has_stage(ar.STAGE_CLASSIFIER) and config.test_images:
        test_set = pl.load_dataset(config, "test")
        n = min(len(test_set), 3000)
        feats = pl.compute_features(
            archive.config, archive.filters, archive.discovery_weights,
            test_set.images[:n], pl.SEED_EVAL_ENCODE)
        reports.write_sparsity_csv(
            os.path.join(out_dir, "class_activity.csv"), feats,
            test_set.labels[:n])
        lines.append(f"per-class mean activity written for {n} images")
    _write_summary(out_dir, lines)
    return 0


def cmd_dump_filters(args) -> int:
    config, out_dir = _setup(args)
    archive = ar.load_model(_model_path(out_dir))
    archive.require_stage(ar.STAGE_FILTERS)
    reports.dump_filters_pgm(archive.filters,
                             os.path.join(out_dir, "filters.pgm"))
    lines = [f"filters.pgm written ({archive.config.D} filters)"]
    if args.with_maps and config.train_images:
        train_set = pl.load_dataset(config, "train")
        img = train_set.images[args.image_index]
        pooled_flat = pl.encode_pooled(
            img, archive.filters, archive.config,
            pl.image_rng(archive.config.seed, pl.SEED_EVAL_ENCODE,
                         args.image_index))
        pr, pc = archive.config.pooled_shape
        from .convnet import PooledMaps
        pooled = PooledMaps(
            spikes=pooled_flat.reshape(archive.config.D, pr, pc,
                                       archive.config.T),
            winner_index=np.zeros((archive.config.D, pr, pc), dtype=np.uint8),
            block=archive.config.l_p)
        reports.dump_pooled_counts_pgm(
            pooled, os.path.join(out_dir, "pooled_maps.pgm"),
            steps=archive.config.T)
        lines.append(f"pooled_maps.pgm written for image {args.image_index} "
                     f"(label {train_set.labels[args.image_index]})")
    _write_summary(out_dir, lines)
    return 0


def cmd_write_config(args) -> int:
    config, out_dir = _setup(args)
    path = os.path.join(out_dir, "config.txt")
    save_config(config, path)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikecnn",
        description="Layer-wise unsupervised spiking CNN on MNIST-shaped digits",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    commands = {
        "train-filters": (cmd_train_filters, "train the convolutional filter bank"),
        "train-features": (cmd_train_features, "train the feature discovery layer"),
        "train-classifier": (cmd_train_classifier, "train the SVM head"),
        "run-all": (cmd_run_all, "run every stage, then evaluate"),
        "evaluate": (cmd_evaluate, "evaluate a trained model on the test set"),
        "control-matrix": (cmd_control_matrix,
                           "compare the four discovery-layer variants"),
        "analyze-correlations": (cmd_analyze_correlations,
                                 "weight-correlation and class-activity reports"),
        "dump-filters": (cmd_dump_filters, "write filters (and maps) as PGM"),
        "write-config": (cmd_write_config, "write the effective config file"),
    }
    for name, (func, help_text) in commands.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        p.set_defaults(func=func)
        if name == "run-all":
            p.add_argument("--fresh", action="store_true",
                           help="ignore any existing checkpoint")
        if name in ("evaluate", "control-matrix"):
            p.add_argument("--noise", action="append", metavar="SPEC",
                           help="noise spec gauss:VAR or sp:DENSITY (repeatable)")
        if name == "dump-filters":
            p.add_argument("--with-maps", action="store_true",
                           help="also dump pooled spike-count maps")
            p.add_argument("--image-index", type=int, default=0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpikeCnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
