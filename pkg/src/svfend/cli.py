"""Command-line entry point: synth, split, train, benchmark, analyze, inspect.

Exit codes: 0 success, 1 usage/config error, 2 partial method failure.
Runs are reproducible byte-for-byte for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path


from . import analysis, reporting
from .baselines import default_lexicons, load_lexicons
from .benchmark import (BenchmarkContext, BenchmarkError, METHOD_REGISTRY,
                        SvfendMethod, run_benchmark, write_report_csv,
                        write_report_json)
from .data import DatasetError, load_dataset, save_dataset
from .encoders import EncodingError, SequenceCaps
from .metrics import compute_metrics
from .model import ModelError, save_checkpoint
from .splits import (SplitError, SplitSpec, assign_event_folds, materialize_folds,
                     temporal_split)
from .synth import generate_synthetic_dataset, write_feature_caches
from .training import TrainConfig, TrainingError

CACHE_DIR_ENV = "SVFEND_CACHE_DIR"

# keys a JSON run-config may set; flags always win over the config file
_CONFIG_KEYS = {
    "dataset", "split", "split_seed", "methods", "seed", "out", "epochs",
    "patience", "learning_rate", "batch_size", "val_fraction", "hidden_dim",
    "coattn_heads", "fusion_heads", "dropout", "lexicons", "cache_dir",
    "figures",
}

_SPLIT_KINDS = {"event5": "event_five_fold", "temporal": "temporal"}


class CliError(Exception):
    """Usage or configuration error (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}")


def _load_run_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    unknown = set(config) - _CONFIG_KEYS
    if unknown:
        raise CliError(f"unknown config keys: {sorted(unknown)}")
    return config


def _setting(args, config: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _resolve_cache_root(args, config, dataset_path: Path) -> Path:
    override = _setting(args, config, "cache_dir") or os.environ.get(CACHE_DIR_ENV)
    return Path(override) if override else dataset_path.parent


def _lexicons(args, config):
    path = _setting(args, config, "lexicons")
    return load_lexicons(path) if path else default_lexicons()


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.events < 2 or args.per_event < 1:
        raise CliError("need --events >= 2 and --per-event >= 1")
    if not 0.0 <= args.separability <= 1.0:
        raise CliError("--separability must be in [0, 1]")
    out = Path(args.out)
    dataset = generate_synthetic_dataset(args.events, args.per_event, args.seed,
                                         args.separability)
    out.mkdir(parents=True, exist_ok=True)
    dataset_path = out / "dataset.jsonl"
    save_dataset(dataset, dataset_path)
    n_caches = write_feature_caches(dataset, out, args.seed, args.separability)
    labels = [s.label for s in dataset.samples]
    print(f"wrote {dataset_path}: {len(dataset)} samples, {len(dataset.events)} events, "
          f"{labels.count(0)} real / {labels.count(1)} fake, {n_caches} feature caches")
    return 0


def cmd_split(args) -> int:
    dataset = load_dataset(args.dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "event5":
        folds = assign_event_folds(dataset, args.seed)
        payload = {"kind": "event_five_fold", "seed": args.seed, "folds": folds}
        counts = [list(folds.values()).count(f) for f in range(5)]
        print(f"5 folds over {len(folds)} events; events per fold: {counts}")
    else:
        train, val, test = temporal_split(dataset)
        payload = {"kind": "temporal", "train_ids": train, "val_ids": val,
                   "test_ids": test}
        print(f"temporal split sizes: train {len(train)}, val {len(val)}, test {len(test)}")
    out.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    print(f"wrote {out}")
    return 0


def cmd_train(args) -> int:
    config = _load_run_config(args.config)
    dataset_path = Path(_require(args, config, "dataset"))
    dataset = load_dataset(dataset_path)
    seed = int(_setting(args, config, "seed", 0))
    split = SplitSpec(kind=_SPLIT_KINDS[_setting(args, config, "split", "event5")],
                      seed=int(_setting(args, config, "split_seed", 0)))
    folds = materialize_folds(dataset, split)
    if not 0 <= args.fold < len(folds):
        raise CliError(f"--fold must be in [0, {len(folds) - 1}] for this split")
    fold = folds[args.fold]

    ctx = _context(args, config, dataset, dataset_path, seed)
    method = SvfendMethod()
    method.fit(ctx, fold.train_ids, val_ids=fold.val_ids or None)
    predictions = method.predict(ctx, fold.test_ids)
    metrics = compute_metrics(predictions, ctx.labels(fold.test_ids))

    out = Path(_require(args, config, "out"))
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(method.module, out / "checkpoint.npz")
    history = [vars(h) for h in method.train_result.history]
    (out / "history.json").write_text(json.dumps({
        "history": history,
        "best_epoch": method.train_result.best_epoch,
        "test_metrics": metrics.as_dict(),
    }, indent=2, sort_keys=True), encoding="utf-8")
    if _setting(args, config, "figures", True):
        reporting.training_history_figure(method.train_result.history,
                                          out / "history.png")
    print(f"fold {fold.name}: test accuracy {metrics.accuracy:.4f} "
          f"(best epoch {method.train_result.best_epoch})")
    print(f"wrote {out / 'checkpoint.npz'}")
    return 0


def _require(args, config, key):
    value = _setting(args, config, key)
    if value is None:
        raise CliError(f"missing required setting: {key}")
    return value


def _context(args, config, dataset, dataset_path: Path, seed: int) -> BenchmarkContext:
    train_config = TrainConfig(
        epochs=int(_setting(args, config, "epochs", TrainConfig.epochs)),
        patience=int(_setting(args, config, "patience", TrainConfig.patience)),
        learning_rate=float(_setting(args, config, "learning_rate",
                                     TrainConfig.learning_rate)),
        batch_size=int(_setting(args, config, "batch_size", TrainConfig.batch_size)),
        val_fraction=float(_setting(args, config, "val_fraction",
                                    TrainConfig.val_fraction)),
        seed=seed,
    )
    model_overrides = {}
    for key in ("hidden_dim", "coattn_heads", "fusion_heads", "dropout"):
        value = _setting(args, config, key)
        if value is not None:
            model_overrides[key] = float(value) if key == "dropout" else int(value)
    return BenchmarkContext(
        dataset,
        cache_root=_resolve_cache_root(args, config, dataset_path),
        caps=SequenceCaps(),
        lexicons=_lexicons(args, config),
        train_config=train_config,
        model_overrides=model_overrides,
        seed=seed,
    )


def cmd_benchmark(args) -> int:
    config = _load_run_config(args.config)
    dataset_path = Path(_require(args, config, "dataset"))
    dataset = load_dataset(dataset_path)
    methods = _setting(args, config, "methods", "svfend,majority")
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    unknown = [m for m in methods if m not in METHOD_REGISTRY]
    if unknown:
        raise CliError(f"unknown methods {unknown}; registered: "
                       f"{', '.join(sorted(METHOD_REGISTRY))}")
    kind = _setting(args, config, "split", "event5")
    if kind not in _SPLIT_KINDS:
        raise CliError(f"--split must be one of {sorted(_SPLIT_KINDS)}")
    split = SplitSpec(kind=_SPLIT_KINDS[kind],
                      seed=int(_setting(args, config, "split_seed", 0)))
    seed = int(_setting(args, config, "seed", 0))
    ctx = _context(args, config, dataset, dataset_path, seed)

    report = run_benchmark(methods, dataset, split, ctx)
    out = Path(_require(args, config, "out"))
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(report, out / "benchmark.csv")
    write_report_json(report, out / "benchmark.json")
    if _setting(args, config, "figures", True):
        reporting.benchmark_figure(report, out / "benchmark_accuracy.png")
        reporting.metric_table_figure(report, out / "benchmark_metrics.png")
    for method in report.methods:
        aggregate = method.aggregate()
        if aggregate:
            mean, std = aggregate["accuracy"]
            spread = f" ± {std:.4f}" if std is not None else ""
            print(f"{method.method:14s} accuracy {mean:.4f}{spread}")
        for err in method.errors:
            print(f"{method.method:14s} ERROR {err}", file=sys.stderr)
    print(f"wrote {out / 'benchmark.csv'}")
    return 2 if report.has_errors else 0


def cmd_analyze(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.analysis == "extract":
        articles = [line for line in
                    Path(args.articles).read_text(encoding="utf-8").splitlines() if line]
        patterns = (analysis.load_patterns(args.patterns) if args.patterns
                    else analysis.default_patterns())
        extracted = analysis.extract_key_sentences(articles, patterns)
        _write_csv(out / "extracted.csv", ["article_index", "claim"], extracted)
        print(f"extracted {len(extracted)} claims from {len(articles)} articles")
        print(f"wrote {out / 'extracted.csv'}")
        return 0

    dataset = load_dataset(args.dataset)
    if args.analysis == "dedup":
        rates = analysis.duplication_by_label(dataset, args.threshold)
        rows = [(name, f"{rate:.6f}") for name, rate in sorted(rates.items())]
        _write_csv(out / "dedup.csv", ["label", "duplication_rate"], rows)
        if args.figures:
            reporting.dedup_figure(rates, out / "dedup.png")
        print(f"duplication rate: fake {rates['fake']:.3f}, real {rates['real']:.3f}")
    elif args.analysis == "emotion":
        lexicon = (analysis.load_emotion_lexicon(args.emotion_lexicon)
                   if args.emotion_lexicon else analysis.default_emotion_lexicon())
        profiles = analysis.title_emotion_by_label(dataset, lexicon)
        rows = [(name, emotion, f"{profiles[name][k]:.6f}")
                for name in sorted(profiles)
                for k, emotion in enumerate(analysis.EMOTIONS)]
        _write_csv(out / "emotion.csv", ["label", "emotion", "mean_intensity"], rows)
        if args.figures:
            reporting.emotion_figure(profiles, out / "emotion.png")
        print(f"wrote {out / 'emotion.csv'}")
    elif args.analysis == "doubt":
        patterns = ([p.pattern for p in analysis.load_patterns(args.doubt_patterns)]
                    if args.doubt_patterns
                    else [p.pattern for p in default_lexicons().doubt_patterns])
        ratios = analysis.doubt_ratio(dataset, patterns)
        rows = [(name, f"{ratios[name]:.6f}") for name in sorted(ratios)]
        _write_csv(out / "doubt.csv", ["label", "fraction_with_doubtful_comments"], rows)
        if args.figures:
            reporting.doubt_figure(ratios, out / "doubt.png")
        print(f"doubtful-comment ratio: fake {ratios['fake']:.3f}, real {ratios['real']:.3f}")
    elif args.analysis == "likes-fans":
        boundaries = [float(b) for b in args.bins.split(",") if b]
        stats = analysis.likes_vs_fans(dataset, boundaries)
        rows = [(s.bin_index, s.fan_low, s.fan_high, s.label, s.count,
                 f"{s.mean_like_count:.6f}") for s in stats]
        _write_csv(out / "likes_fans.csv",
                   ["bin_index", "fan_low", "fan_high", "label", "count",
                    "mean_like_count"], rows)
        if args.figures:
            reporting.likes_vs_fans_figure(stats, out / "likes_fans.png")
        print(f"wrote {out / 'likes_fans.csv'}")
    elif args.analysis == "ip-locations":
        rows = analysis.ip_location_tally(dataset)
        _write_csv(out / "ip_locations.csv", ["ip_location", "label", "count"], rows)
        print(f"wrote {out / 'ip_locations.csv'} ({len(rows)} rows)")
    return 0


def cmd_inspect(args) -> int:
    dataset = load_dataset(args.dataset, strict=not args.lenient)
    labels = [s.label for s in dataset.samples]
    with_comments = sum(1 for s in dataset.samples if s.comments)
    times = [s.publish_time for s in dataset.samples]
    print(f"samples:        {len(dataset)}")
    print(f"events:         {len(dataset.events)}")
    print(f"real / fake:    {labels.count(0)} / {labels.count(1)}")
    if dataset.samples:
        print(f"with comments:  {with_comments} ({with_comments / len(dataset):.0%})")
        print(f"publish range:  {min(times)} .. {max(times)}")
    if dataset.skipped_records:
        print(f"skipped:        {dataset.skipped_records} malformed records")
    return 0


# --- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svfend",
                     description="Fake-news short-video detection benchmark toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset plus feature caches")
    p.add_argument("--events", type=int, required=True)
    p.add_argument("--per-event", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--separability", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("split", help="compute and save a data split")
    p.add_argument("--dataset", required=True)
    p.add_argument("--kind", choices=sorted(_SPLIT_KINDS), default="event5")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON file")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train the co-attention model on one fold")
    _add_run_options(p)
    p.add_argument("--fold", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("benchmark", help="run methods across a split and write reports")
    _add_run_options(p)
    p.add_argument("--methods", help="comma-separated method names")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("analyze", help="corpus analyses, one CSV (+ figure) each")
    p.add_argument("analysis", choices=["extract", "dedup", "emotion", "doubt",
                                        "likes-fans", "ip-locations"])
    p.add_argument("--dataset")
    p.add_argument("--articles", help="extract: text file, one article per line")
    p.add_argument("--patterns", help="extract: pattern file (priority = line order)")
    p.add_argument("--doubt-patterns", help="doubt: pattern file override")
    p.add_argument("--emotion-lexicon", help="emotion: word/emotion/intensity TSV")
    p.add_argument("--threshold", type=int, default=0, help="dedup: Hamming threshold")
    p.add_argument("--bins", default="100,1000,10000,100000",
                   help="likes-fans: fan-count boundaries")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_analyze, figures=True)

    p = sub.add_parser("inspect", help="print dataset statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--lenient", action="store_true",
                   help="skip malformed records instead of failing")
    p.set_defaults(func=cmd_inspect)
    return parser


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags override it")
    p.add_argument("--dataset")
    p.add_argument("--split", choices=sorted(_SPLIT_KINDS))
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--coattn-heads", dest="coattn_heads", type=int)
    p.add_argument("--fusion-heads", dest="fusion_heads", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lexicons", help="directory of lexicon files")
    p.add_argument("--cache-dir", dest="cache_dir",
                   help=f"feature-cache root (or ${CACHE_DIR_ENV})")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)


def main(argv=None) -> int:
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
        if args.command == "analyze":
            if args.analysis == "extract" and not args.articles:
                raise CliError("analyze extract requires --articles")
            if args.analysis != "extract" and not args.dataset:
                raise CliError(f"analyze {args.analysis} requires --dataset")
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DatasetError, SplitError, EncodingError, BenchmarkError, TrainingError,
            ModelError, analysis.AnalysisError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
