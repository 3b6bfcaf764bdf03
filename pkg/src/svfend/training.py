"""Seeded training loop: event-level validation carving, Adam, early stopping."""

from __future__ import annotations

import copy
import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .data import Dataset
from .model import bce_loss, predict_label


class TrainingError(RuntimeError):
    """Empty train/validation sets or an unsupported optimizer."""


def derive_seed(seed: int, *tags) -> int:
    """Stable sub-seed so every random stream funnels from one run seed."""
    key = "|".join([str(seed), *map(str, tags)])
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % 2**63


@dataclass
class TrainConfig:
    """Optimization settings; defaults match the reference setup."""

    epochs: int = 30
    patience: int = 5
    learning_rate: float = 1e-4
    optimizer: str = "adam"
    batch_size: int = 64
    val_fraction: float = 0.1
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    history: list[EpochStats]
    best_epoch: int
    best_val_accuracy: float
    epochs_run: int = field(init=False)

    def __post_init__(self):
        self.epochs_run = len(self.history)


def carve_validation(dataset: Dataset, train_ids, val_fraction: float, seed: int
                     ) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Hold out a fraction of *events* from the training ids for early stopping."""
    by_id = dataset.by_id()
    events = sorted({by_id[i].event_id for i in train_ids})
    n_val = max(1, round(val_fraction * len(events)))
    order = np.random.default_rng(derive_seed(seed, "val-carve")).permutation(len(events))
    val_events = {events[int(i)] for i in order[:n_val]}
    train = tuple(i for i in train_ids if by_id[i].event_id not in val_events)
    val = tuple(i for i in train_ids if by_id[i].event_id in val_events)
    if not train:
        raise TrainingError("validation carve left the training set empty")
    return train, val


def _make_optimizer(model: torch.nn.Module, config: TrainConfig) -> torch.optim.Optimizer:
    if config.optimizer != "adam":
        raise TrainingError(f"unsupported optimizer: {config.optimizer}")
    return torch.optim.Adam(model.parameters(), lr=config.learning_rate)


def _evaluate(model, forward_fn, ids, labels, batch_size: int) -> float:
    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(ids), batch_size):
            chunk = ids[start:start + batch_size]
            preds = predict_label(forward_fn(model, chunk))
            correct += int((np.atleast_1d(preds) == labels[start:start + batch_size]).sum())
    return correct / len(ids)


def train_model(model: torch.nn.Module, forward_fn, dataset: Dataset, train_ids,
                config: TrainConfig, val_ids=None) -> TrainResult:
    """Train with early stopping on validation accuracy; restores the best epoch.

    ``forward_fn(model, ids)`` must return class probabilities for the ids.
    When ``val_ids`` is omitted, a fraction of training *events* is carved out,
    so validation never shares an event with training.
    """
    train_ids = tuple(train_ids)
    if not train_ids:
        raise TrainingError("empty training set")
    if val_ids is None:
        train_ids, val_ids = carve_validation(dataset, train_ids, config.val_fraction,
                                              config.seed)
    val_ids = tuple(val_ids)
    if not val_ids:
        raise TrainingError("empty validation set")

    by_id = dataset.by_id()
    train_labels = {i: by_id[i].label for i in train_ids}
    val_labels = np.array([by_id[i].label for i in val_ids], dtype=int)

    torch.manual_seed(derive_seed(config.seed, "train-loop"))
    shuffle_rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))
    optimizer = _make_optimizer(model, config)

    history: list[EpochStats] = []
    best_state = copy.deepcopy(model.state_dict())
    best_val = -np.inf
    best_epoch = -1
    epochs_without_improvement = 0

    for epoch in range(config.epochs):
        model.train()
        order = shuffle_rng.permutation(len(train_ids))
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch_ids = [train_ids[int(i)] for i in order[start:start + config.batch_size]]
            probs = forward_fn(model, batch_ids)
            loss = bce_loss(probs, [train_labels[i] for i in batch_ids])
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += float(loss.detach()) * len(batch_ids)
        train_loss = loss_sum / len(train_ids)
        val_accuracy = _evaluate(model, forward_fn, val_ids, val_labels, config.batch_size)
        history.append(EpochStats(epoch=epoch, train_loss=train_loss,
                                  val_accuracy=val_accuracy))
        if val_accuracy > best_val:
            best_val = val_accuracy
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement > config.patience:
                break

    model.load_state_dict(best_state)
    return TrainResult(history=history, best_epoch=best_epoch, best_val_accuracy=best_val)
