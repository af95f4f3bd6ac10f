"""Local training loop: seeded batching, early stopping, best-weights tracking."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fedpose.errors import ConfigError, EvaluationError, NumericalHealthError
from fedpose.models import forward_logits, loss_and_gradients
from fedpose.nn import layers
from fedpose.nn.optim import AdamState, adam_step
from fedpose.nn.params import ParameterSet
from fedpose.pose.types import NUM_CLASSES, WindowSample, stack_windows
from fedpose.seeding import derive_rng

EVAL_BATCH = 256


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    lr: float = 2e-4
    max_epochs: int = 500
    patience: int | None = 15  # None disables early stopping
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1 when enabled, got {self.patience}")
        if self.max_epochs < 0:
            raise ConfigError(f"max_epochs must be >= 0, got {self.max_epochs}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainTrace:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_loss", "val_loss", "val_acc"])
            for r in self.epochs:
                writer.writerow([r.epoch, repr(r.train_loss), repr(r.val_loss),
                                 repr(r.val_accuracy)])


@dataclass
class TrainResult:
    final_params: ParameterSet
    best_params: ParameterSet
    trace: TrainTrace


@dataclass
class EvalResult:
    loss: float
    accuracy: float
    confusion: np.ndarray  # (8, 8) ints, rows true / columns predicted


def evaluate(params: ParameterSet, kind: str, config, windows) -> EvalResult:
    """Mean loss, top-1 accuracy, and the 8x8 confusion matrix."""
    if isinstance(windows, tuple):
        x, y = windows
    else:
        if not windows:
            raise EvaluationError("cannot evaluate an empty dataset")
        x, y = stack_windows(windows)
    if x.shape[0] == 0:
        raise EvaluationError("cannot evaluate an empty dataset")

    confusion = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    loss_sum = 0.0
    for start in range(0, x.shape[0], EVAL_BATCH):
        xb = x[start : start + EVAL_BATCH]
        yb = y[start : start + EVAL_BATCH]
        logits = forward_logits(params, kind, config, xb)
        losses, probs = layers.softmax_cross_entropy(logits, yb)
        loss_sum += float(losses.sum())
        pred = probs.argmax(axis=1)
        np.add.at(confusion, (yb, pred), 1)
    total = x.shape[0]
    accuracy = float(np.trace(confusion)) / total
    return EvalResult(loss=loss_sum / total, accuracy=accuracy, confusion=confusion)


def _epoch_batches(n: int, batch_size: int, rng) -> list[np.ndarray]:
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_local(
    params: ParameterSet,
    kind: str,
    config,
    train: list[WindowSample],
    val: list[WindowSample],
    tc: TrainConfig,
) -> TrainResult:
    """Seeded epochs of Adam over batches of 64, early-stopped on val loss.

    Inputs are not mutated; both the final-epoch and the best-validation
    weights come back with the per-epoch trace.
    """
    if not train:
        raise ConfigError("train_local: empty training set")
    if not val and tc.patience is not None:
        raise ConfigError("train_local: empty validation set with early stopping on")

    params = params.copy()
    trace = TrainTrace()
    if tc.max_epochs == 0:
        trace.best_epoch = 0
        return TrainResult(params, params.copy(), trace)

    x, y = stack_windows(train)
    val_xy = stack_windows(val) if val else None
    state = AdamState.for_params(params, lr=tc.lr)
    best_params = params.copy()
    best_val = np.inf
    bad_epochs = 0

    for epoch in range(1, tc.max_epochs + 1):
        rng = derive_rng(tc.seed, "shuffle", epoch)
        loss_sum = 0.0
        for batch_idx, sel in enumerate(_epoch_batches(len(train), tc.batch_size, rng)):
            try:
                loss, grads = loss_and_gradients(params, kind, config, x[sel], y[sel])
            except NumericalHealthError as exc:
                raise NumericalHealthError(
                    f"{exc} (epoch {epoch}, batch {batch_idx})"
                ) from None
            adam_step(params, grads, state)
            loss_sum += loss * len(sel)
        train_loss = loss_sum / len(train)

        if val_xy is not None:
            ev = evaluate(params, kind, config, val_xy)
            val_loss, val_acc = ev.loss, ev.accuracy
        else:
            val_loss, val_acc = float("nan"), float("nan")
        trace.epochs.append(EpochRecord(epoch, train_loss, val_loss, val_acc))

        if val_xy is not None and val_loss < best_val:
            best_val = val_loss
            best_params = params.copy()
            trace.best_epoch = epoch
            bad_epochs = 0
        else:
            bad_epochs += 1
        if tc.patience is not None and bad_epochs >= tc.patience:
            trace.stopped_early = True
            break

    if val_xy is None:
        best_params = params.copy()
        trace.best_epoch = trace.epochs[-1].epoch
    return TrainResult(params, best_params, trace)
