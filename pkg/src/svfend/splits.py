"""Event-level five-fold and chronological train/val/test splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset

N_FOLDS = 5
TEMPORAL_VAL_FRACTION = 0.15
TEMPORAL_TEST_FRACTION = 0.15


class SplitError(ValueError):
    """Dataset too small for the requested split."""


@dataclass(frozen=True)
class SplitSpec:
    """Declarative split request consumed by the benchmark runner."""

    kind: str  # "event_five_fold" | "temporal"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("event_five_fold", "temporal"):
            raise SplitError(f"unknown split kind: {self.kind}")


@dataclass(frozen=True)
class Fold:
    name: str
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    val_ids: tuple[str, ...] = field(default=())


def assign_event_folds(dataset: Dataset, seed: int) -> dict[str, int]:
    """Shuffle event ids by seed and deal them round-robin into five folds."""
    events = sorted(dataset.events)
    if len(events) < N_FOLDS:
        raise SplitError(f"need at least {N_FOLDS} events, got {len(events)}")
    order = np.random.default_rng(seed).permutation(len(events))
    return {events[int(idx)]: pos % N_FOLDS for pos, idx in enumerate(order)}


def event_five_fold_split(dataset: Dataset, seed: int) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Five (train_ids, test_ids) pairs with no event shared between the sides."""
    fold_of_event = assign_event_folds(dataset, seed)
    folds = []
    for f in range(N_FOLDS):
        test, train = [], []
        for sample in dataset.samples:
            (test if fold_of_event[sample.event_id] == f else train).append(sample.sample_id)
        folds.append((tuple(train), tuple(test)))
    return folds


def temporal_split(dataset: Dataset) -> tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...]]:
    """Chronological 70/15/15 split: floor counts for val/test, remainder to train."""
    n = len(dataset.samples)
    if n < 3 or len({s.publish_time for s in dataset.samples}) < 3:
        raise SplitError("temporal split needs at least 3 samples with distinct timestamps")
    ordered = sorted(dataset.samples, key=lambda s: (s.publish_time, s.sample_id))
    n_val = int(TEMPORAL_VAL_FRACTION * n)
    n_test = int(TEMPORAL_TEST_FRACTION * n)
    n_train = n - n_val - n_test
    ids = [s.sample_id for s in ordered]
    return (tuple(ids[:n_train]),
            tuple(ids[n_train:n_train + n_val]),
            tuple(ids[n_train + n_val:]))


def materialize_folds(dataset: Dataset, spec: SplitSpec) -> list[Fold]:
    """Expand a SplitSpec into concrete folds."""
    if spec.kind == "event_five_fold":
        return [Fold(name=str(i), train_ids=train, test_ids=test)
                for i, (train, test) in enumerate(event_five_fold_split(dataset, spec.seed))]
    train, val, test = temporal_split(dataset)
    return [Fold(name="test", train_ids=train, test_ids=test, val_ids=val)]
