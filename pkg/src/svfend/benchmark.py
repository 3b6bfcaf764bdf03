"""Benchmark runner: trains and evaluates registered methods across splits.

Reports carry per-fold accuracy / macro precision / macro recall / macro F1
plus mean and sample-std aggregates, written as CSV with a JSON twin holding
full config provenance.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import baselines
from .data import Dataset
from .encoders import (FeatureSequence, SequenceCaps, StubSource, build_bundle,
                       cap_and_pad, default_stub_plugins, encode_modality,
                       uniform_indices)
from .metrics import METRIC_NAMES, Metrics, compute_metrics, mean_std
from .model import SVFEND, collate_bundles, config_for_bundle, predict_label
from .splits import Fold, SplitSpec, materialize_folds
from .training import TrainConfig, TrainingError, derive_seed, train_model


class BenchmarkError(RuntimeError):
    """Unknown method name or an unusable benchmark configuration."""


class BenchmarkContext:
    """Shared per-run state: dataset, encoder plugins, cached bundles and sequences."""

    def __init__(self, dataset: Dataset, cache_root: str | Path | None = None,
                 plugins: dict | None = None, caps: SequenceCaps | None = None,
                 lexicons: baselines.LexiconSet | None = None,
                 train_config: TrainConfig | None = None,
                 model_overrides: dict | None = None, seed: int = 0):
        self.dataset = dataset
        self.cache_root = cache_root
        self.plugins = plugins or default_stub_plugins()
        self.caps = caps or SequenceCaps()
        self.lexicons = lexicons or baselines.default_lexicons()
        self.train_config = train_config or TrainConfig()
        self.model_overrides = dict(model_overrides or {})
        self.seed = seed
        self._by_id = dataset.by_id()
        self._bundles: dict | None = None
        self._sequences: dict[tuple[str, str], FeatureSequence] = {}

    def labels(self, ids) -> np.ndarray:
        return np.array([self._by_id[i].label for i in ids], dtype=int)

    def samples(self, ids) -> list:
        return [self._by_id[i] for i in ids]

    @property
    def bundles(self) -> dict:
        if self._bundles is None:
            self._bundles = {
                s.sample_id: build_bundle(s, self.plugins, self.caps, self.cache_root)
                for s in self.dataset.samples
            }
        return self._bundles

    def sequence(self, sample_id: str, modality: str) -> FeatureSequence:
        """Capped per-step features for one modality (baseline inputs)."""
        if modality == "text":
            return self.bundles[sample_id].text
        if modality == "audio":
            return self.bundles[sample_id].audio
        if modality == "frame":
            return self.bundles[sample_id].frames
        key = (sample_id, modality)
        if key not in self._sequences:
            sample = self._by_id[sample_id]
            if modality == "clip":
                # the bundle only keeps the averaged clip vector; re-encode
                self._sequences[key] = self._clip_sequence(sample)
            elif modality == "comment":
                self._sequences[key] = self._comment_sequence(sample)
            else:
                raise BenchmarkError(f"no sequence for modality {modality!r}")
        return self._sequences[key]

    def _clip_sequence(self, sample) -> FeatureSequence:
        plugin = self.plugins["clip"]
        ref = sample.media_refs.get("clip")
        if ref is not None:
            path = Path(ref)
            if not path.is_absolute() and self.cache_root is not None:
                path = Path(self.cache_root) / path
            seq = encode_modality(path, plugin)
        else:
            seq = encode_modality(StubSource(sample.sample_id), plugin)
        return cap_and_pad(seq, self.caps.clips)

    def _comment_sequence(self, sample) -> FeatureSequence:
        plugin = self.plugins["comment"]
        comments = list(sample.comments)
        if len(comments) > self.caps.comments:
            comments = [comments[i]
                        for i in uniform_indices(len(comments), self.caps.comments)]
        if comments:
            seq = encode_modality([c.text for c in comments], plugin)
        else:
            seq = FeatureSequence.empty(plugin.output_dim)
        return cap_and_pad(seq, self.caps.comments)


# --- methods -------------------------------------------------------------------------

class MajorityMethod:
    """Constant prediction of the majority training class (ties -> real)."""

    name = "majority"
    modality_tag = "-"

    def fit(self, ctx: BenchmarkContext, train_ids, val_ids=None) -> None:
        labels = ctx.labels(train_ids)
        self._label = int((labels == 1).sum() > (labels == 0).sum())

    def predict(self, ctx: BenchmarkContext, ids) -> np.ndarray:
        return np.full(len(ids), self._label, dtype=int)


class HandcraftedSvmMethod:
    """Hand-crafted feature groups behind a column-normalized linear SVM."""

    def __init__(self, name: str, groups: tuple[str, ...], modality_tag: str):
        self.name = name
        self.groups = groups
        self.modality_tag = modality_tag

    def _features(self, ctx, ids) -> np.ndarray:
        samples = ctx.samples(ids)
        _, matrix = baselines.handcrafted_matrix(
            samples, self.groups, ctx.lexicons, self._text_vocab, self._comment_vocab)
        return matrix

    def fit(self, ctx: BenchmarkContext, train_ids, val_ids=None) -> None:
        train_samples = ctx.samples(train_ids)
        # vocabularies are fitted on the training split only (no test leakage);
        # min_df=1 because desk-scale corpora are tiny
        self._text_vocab, self._comment_vocab = baselines.fit_group_vocabs(
            train_samples, self.groups, min_df=1)
        matrix = self._features(ctx, train_ids)
        self._model = baselines.train_svm(matrix, ctx.labels(train_ids),
                                          seed=derive_seed(ctx.seed, self.name) % 2**31)

    def predict(self, ctx: BenchmarkContext, ids) -> np.ndarray:
        return self._model.predict(self._features(ctx, ids))


class _TorchMethod:
    """Shared train/predict plumbing for the neural methods."""

    name = "?"
    modality_tag = "?"

    def _build_module(self, ctx: BenchmarkContext) -> torch.nn.Module:
        raise NotImplementedError

    def _forward(self, ctx: BenchmarkContext, module, ids) -> torch.Tensor:
        raise NotImplementedError

    def _trainable_ids(self, ctx: BenchmarkContext, ids):
        return list(ids)

    def fit(self, ctx: BenchmarkContext, train_ids, val_ids=None) -> None:
        self._fallback = MajorityMethod()
        self._fallback.fit(ctx, train_ids)
        train_ids = self._trainable_ids(ctx, train_ids)
        if val_ids is not None:
            val_ids = self._trainable_ids(ctx, val_ids)
            if not val_ids:
                val_ids = None
        if not train_ids:
            raise TrainingError(f"{self.name}: no trainable samples in the training set")
        torch.manual_seed(derive_seed(ctx.seed, self.name, "init"))
        self.module = self._build_module(ctx)
        config = TrainConfig(**{**ctx.train_config.to_dict(),
                                "seed": derive_seed(ctx.seed, self.name) % 2**31})
        self.train_result = train_model(
            self.module, lambda module, ids: self._forward(ctx, module, ids),
            ctx.dataset, train_ids, config, val_ids=val_ids)

    def predict(self, ctx: BenchmarkContext, ids) -> np.ndarray:
        usable = set(self._trainable_ids(ctx, ids))
        out = np.empty(len(ids), dtype=int)
        usable_idx = [k for k, i in enumerate(ids) if i in usable]
        self.module.eval()
        with torch.no_grad():
            for start in range(0, len(usable_idx), 64):
                rows = usable_idx[start:start + 64]
                probs = self._forward(ctx, self.module, [ids[k] for k in rows])
                out[rows] = np.atleast_1d(predict_label(probs))
        rest = [k for k in range(len(ids)) if k not in set(usable_idx)]
        if rest:
            out[rest] = self._fallback.predict(ctx, [ids[k] for k in rest])
        return out


class SvfendMethod(_TorchMethod):
    """The full co-attention model over all six modality inputs."""

    name = "svfend"
    modality_tag = "ALL"

    def _build_module(self, ctx: BenchmarkContext) -> torch.nn.Module:
        first = ctx.bundles[ctx.dataset.samples[0].sample_id]
        config = config_for_bundle(first, caps=ctx.caps, **ctx.model_overrides)
        return SVFEND(config)

    def _forward(self, ctx, module, ids) -> torch.Tensor:
        batch = collate_bundles([ctx.bundles[i] for i in ids])
        return module(batch)


class _SequenceMethod(_TorchMethod):
    """Neural classifier over one capped feature sequence."""

    modality = "?"
    require_valid = False

    def _inputs(self, ctx, ids):
        seqs = [ctx.sequence(i, self.modality) for i in ids]
        values = torch.as_tensor(np.stack([s.values for s in seqs]))
        mask = torch.as_tensor(np.stack([s.mask for s in seqs]))
        return values, mask

    def _trainable_ids(self, ctx, ids):
        if not self.require_valid:
            return list(ids)
        return [i for i in ids if ctx.sequence(i, self.modality).valid_count > 0]

    def _forward(self, ctx, module, ids) -> torch.Tensor:
        values, mask = self._inputs(ctx, ids)
        return module(values, mask)


class TextCnnMethod(_SequenceMethod):
    name = "textcnn"
    modality_tag = "T&Tr"
    modality = "text"

    def _build_module(self, ctx):
        return baselines.TextCNN(ctx.plugins["text"].output_dim)


def _attention_method(method_name: str, modality: str, tag: str):
    class AttentionMethod(_SequenceMethod):
        name = method_name
        modality_tag = tag
        require_valid = True

        def _build_module(self, ctx):
            return baselines.AttentionPoolClassifier(ctx.plugins[self.modality].output_dim)

    AttentionMethod.modality = modality
    AttentionMethod.__name__ = f"AttentionMethod_{modality}"
    return AttentionMethod


METHOD_REGISTRY: dict[str, type | object] = {
    "majority": MajorityMethod,
    "svfend": SvfendMethod,
    "svm_meta": lambda: HandcraftedSvmMethod("svm_meta", ("metadata",), "M"),
    "svm_text": lambda: HandcraftedSvmMethod("svm_text", ("text",), "T&Tr"),
    "svm_comments": lambda: HandcraftedSvmMethod("svm_comments", ("comment",), "C"),
    "svm_all": lambda: HandcraftedSvmMethod("svm_all", ("metadata", "text", "comment"),
                                            "M,T&Tr,C"),
    "textcnn": TextCnnMethod,
    "att_frames": _attention_method("att_frames", "frame", "F"),
    "att_clips": _attention_method("att_clips", "clip", "V"),
    "att_audio": _attention_method("att_audio", "audio", "A"),
    "att_comments": _attention_method("att_comments", "comment", "C"),
}


def make_method(name: str):
    factory = METHOD_REGISTRY.get(name)
    if factory is None:
        raise BenchmarkError(
            f"unknown method {name!r}; registered: {', '.join(sorted(METHOD_REGISTRY))}")
    return factory()


# --- reports ------------------------------------------------------------------------

@dataclass
class MethodReport:
    method: str
    modality_tag: str
    folds: list[tuple[str, Metrics]] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def aggregate(self) -> dict[str, tuple[float, float | None]]:
        out = {}
        for metric in METRIC_NAMES:
            values = [getattr(m, metric) for _, m in self.folds]
            if values:
                out[metric] = mean_std(values)
        return out


@dataclass
class BenchmarkReport:
    split: SplitSpec
    methods: list[MethodReport]
    provenance: dict = field(default_factory=dict)

    @property
    def has_errors(self) -> bool:
        return any(m.errors for m in self.methods)


def run_benchmark(method_names, dataset: Dataset, split: SplitSpec,
                  ctx: BenchmarkContext | None = None) -> BenchmarkReport:
    """Train/evaluate each named method on every fold; failures are recorded
    per cell and the run continues."""
    ctx = ctx or BenchmarkContext(dataset)
    folds: list[Fold] = materialize_folds(dataset, split)
    reports = []
    for name in method_names:
        report = MethodReport(method=name, modality_tag=make_method(name).modality_tag)
        for fold in folds:
            try:
                method = make_method(name)
                method.fit(ctx, fold.train_ids, val_ids=fold.val_ids or None)
                predictions = method.predict(ctx, fold.test_ids)
                report.folds.append(
                    (fold.name, compute_metrics(predictions, ctx.labels(fold.test_ids))))
            except Exception as exc:  # per-cell failure, run continues
                report.errors.append(f"fold {fold.name}: {exc}")
        reports.append(report)
    provenance = {
        "split": {"kind": split.kind, "seed": split.seed},
        "seed": ctx.seed,
        "train_config": ctx.train_config.to_dict(),
        "model_overrides": ctx.model_overrides,
        "caps": vars(ctx.caps),
        "n_samples": len(dataset),
        "n_events": len(dataset.events),
    }
    return BenchmarkReport(split=split, methods=reports, provenance=provenance)


def write_report_csv(report: BenchmarkReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "modality_tag", "fold", *METRIC_NAMES])
        for method in report.methods:
            for fold_name, metrics in method.folds:
                writer.writerow([method.method, method.modality_tag, fold_name,
                                 *(f"{getattr(metrics, m):.6f}" for m in METRIC_NAMES)])
            if len(method.folds) > 1:
                aggregate = method.aggregate()
                writer.writerow([method.method, method.modality_tag, "mean",
                                 *(f"{aggregate[m][0]:.6f}" for m in METRIC_NAMES)])
                writer.writerow([method.method, method.modality_tag, "std",
                                 *(f"{aggregate[m][1]:.6f}" for m in METRIC_NAMES)])


def write_report_json(report: BenchmarkReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "provenance": report.provenance,
        "methods": [
            {
                "name": m.method,
                "modality_tag": m.modality_tag,
                "folds": {name: metrics.as_dict() for name, metrics in m.folds},
                "aggregate": {metric: {"mean": mean, "std": std}
                              for metric, (mean, std) in m.aggregate().items()},
                "errors": m.errors,
            }
            for m in report.methods
        ],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
