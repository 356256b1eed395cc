"""A small deterministic classifier and the training loop around it.

The model is a linear softmax classifier by default (features -> classes),
with an optional one-hidden-layer variant using max(0, .) activation. The
loop follows a fixed protocol: seeded shuffled mini-batches, Adam updates,
learning-rate halving when validation accuracy plateaus, early stopping,
and a stratified clip-level validation split. Noise defenses compose in a
fixed order per batch: smoothing is pre-applied to the target matrix at
dataset preparation, mixup mixes the batch (epoch-gated by its warm-up),
losses are computed per example, a discard rule may reject high-loss
instances, and the Adam step uses the mean gradient of the kept instances
only. With the prune strategy, the train set sheds its highest-loss clips
once the stage plan's start epoch has completed, and training continues on
the survivors.

Validation data is never smoothed, mixed, or discarded, and accuracy is
always clip-level: patch softmax outputs are averaged per clip before the
argmax.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import InvalidInputError, TrainingError
from .losses import LossSpec, batch_losses, loss_gradients_from_probs
from .mixup import Batch, MixupPolicy, Pairing, apply_mixup
from .numerics import RngStream, softmax_rows
from .selection import (
    PruneRecord,
    StagePlan,
    Strategy,
    clip_losses,
    discard_mask,
    prune_dataset,
    prune_report_rows,
)
from .smoothing import SmoothingPolicy, targets_matrix

# Sub-stream ids carved out of the run-level stream. Each concern draws
# from its own stream so that toggling one feature never shifts another's
# randomness.
_SPLIT, _INIT, _SHUFFLE, _MIXUP, _PARTNER = 0, 1, 2, 3, 4

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Architecture(str, Enum):
    LINEAR = "linear"
    ONE_HIDDEN = "one_hidden"


@dataclass
class ModelParams:
    """Weights of the classifier; ``weights`` is [W, b] or [W1, b1, W2, b2]."""

    architecture: Architecture
    feature_dim: int
    num_classes: int
    hidden_units: int
    weights: list[np.ndarray]

    def __post_init__(self):
        expected = _weight_shapes(
            self.architecture, self.feature_dim, self.num_classes, self.hidden_units
        )
        shapes = [w.shape for w in self.weights]
        if shapes != expected:
            raise InvalidInputError(
                f"weight shapes {shapes} do not match architecture layout {expected}"
            )
        if not all(np.all(np.isfinite(w)) for w in self.weights):
            raise InvalidInputError("model weights must be finite")

    def copy(self) -> "ModelParams":
        return replace(self, weights=[w.copy() for w in self.weights])


def _weight_shapes(
    architecture: Architecture, feature_dim: int, num_classes: int, hidden_units: int
) -> list[tuple[int, ...]]:
    if architecture == Architecture.LINEAR:
        return [(feature_dim, num_classes), (num_classes,)]
    return [
        (feature_dim, hidden_units),
        (hidden_units,),
        (hidden_units, num_classes),
        (num_classes,),
    ]


def init_params(
    architecture: Architecture,
    feature_dim: int,
    num_classes: int,
    hidden_units: int,
    rng: RngStream,
) -> ModelParams:
    """Seeded Gaussian weights with standard deviation 1/sqrt(fan_in); zero biases."""
    gen = rng.generator()
    weights: list[np.ndarray] = []
    for shape in _weight_shapes(architecture, feature_dim, num_classes, hidden_units):
        if len(shape) == 2:
            fan_in = shape[0]
            weights.append(gen.standard_normal(shape) / math.sqrt(fan_in))
        else:
            weights.append(np.zeros(shape))
    return ModelParams(architecture, feature_dim, num_classes, hidden_units, weights)


def _forward_cached(
    params: ModelParams, features: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    if params.architecture == Architecture.LINEAR:
        w, b = params.weights
        return features @ w + b, None
    w1, b1, w2, b2 = params.weights
    hidden = np.maximum(features @ w1 + b1, 0.0)
    return hidden @ w2 + b2, hidden


def forward(params: ModelParams, features: np.ndarray) -> np.ndarray:
    """Logits for a (N, F) feature matrix."""
    return _forward_cached(params, features)[0]


def _param_grads(
    params: ModelParams,
    features: np.ndarray,
    logit_grads: np.ndarray,
    hidden: np.ndarray | None,
) -> list[np.ndarray]:
    """Backprop pre-scaled per-row logit gradients to the weight arrays."""
    if params.architecture == Architecture.LINEAR:
        return [features.T @ logit_grads, logit_grads.sum(axis=0)]
    w1, b1, w2, b2 = params.weights
    hidden_grads = (logit_grads @ w2.T) * (hidden > 0.0)
    return [
        features.T @ hidden_grads,
        hidden_grads.sum(axis=0),
        hidden.T @ logit_grads,
        logit_grads.sum(axis=0),
    ]


class _Adam:
    def __init__(self, shapes):
        self.first = [np.zeros(s) for s in shapes]
        self.second = [np.zeros(s) for s in shapes]
        self.step_count = 0

    def step(self, weights: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        self.step_count += 1
        correction1 = 1.0 - ADAM_BETA1**self.step_count
        correction2 = 1.0 - ADAM_BETA2**self.step_count
        for w, g, m, v in zip(weights, grads, self.first, self.second):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            w -= lr * (m / correction1) / (np.sqrt(v / correction2) + ADAM_EPS)


@dataclass(frozen=True)
class TrainConfig:
    loss: LossSpec
    max_epochs: int = 100
    batch_size: int = 64
    initial_lr: float = 0.001
    lr_halving_patience: int = 5
    early_stop_patience: int = 15
    val_fraction: float = 0.15
    seed: int = 0
    stage: StagePlan = field(default_factory=StagePlan)
    smoothing: SmoothingPolicy | None = None
    mixup: MixupPolicy | None = None
    architecture: Architecture = Architecture.LINEAR
    hidden_units: int = 32

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 0:
            raise InvalidInputError(f"max_epochs must be >= 0, got {self.max_epochs}")
        if self.initial_lr <= 0:
            raise InvalidInputError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.lr_halving_patience < 1 or self.early_stop_patience < 1:
            raise InvalidInputError("patience values must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidInputError(
                f"val_fraction must lie in (0, 1), got {self.val_fraction}"
            )
        if self.architecture == Architecture.ONE_HIDDEN and self.hidden_units < 1:
            raise InvalidInputError(
                f"hidden_units must be >= 1, got {self.hidden_units}"
            )


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    lr: float
    kept_fraction: float

    def __post_init__(self):
        if self.lr <= 0:
            raise InvalidInputError("lr must stay positive")
        if not 0.0 < self.kept_fraction <= 1.0:
            raise InvalidInputError("kept_fraction must lie in (0, 1]")
        if not 0.0 <= self.val_accuracy <= 1.0:
            raise InvalidInputError("val_accuracy must lie in [0, 1]")
        if not math.isfinite(self.train_loss) or self.train_loss < 0:
            raise InvalidInputError("train_loss must be finite and non-negative")


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord]
    prune_report: list[PruneRecord] | None


def stratified_split(
    dataset: Dataset, val_fraction: float, seed: int | RngStream
) -> tuple[Dataset, Dataset]:
    """Clip-level stratified split: per class, ceil(fraction * clips) go to validation.

    Clips are assigned by a seeded shuffle within each class; no clip
    straddles the two splits, and together they cover the dataset.
    """
    if not 0.0 < val_fraction < 1.0:
        raise InvalidInputError(f"val_fraction must lie in (0, 1), got {val_fraction}")
    if dataset.n_examples == 0:
        raise InvalidInputError("cannot split an empty dataset")
    rng = seed if isinstance(seed, RngStream) else RngStream(int(seed))
    gen = rng.generator()
    clips, _, clip_labels = dataset.clip_table()
    val_clips: list[int] = []
    for cls in np.unique(clip_labels):
        class_clips = clips[clip_labels == cls]
        if class_clips.size < 2:
            raise InvalidInputError(
                f"class {int(cls)} has {class_clips.size} clip(s); need at least 2 to split"
            )
        n_val = math.ceil(val_fraction * class_clips.size)
        order = gen.permutation(class_clips.size)
        val_clips.extend(int(c) for c in class_clips[order[:n_val]])
    val_mask = np.isin(dataset.clip_ids, np.asarray(val_clips, dtype=np.int64))
    return dataset.subset(~val_mask), dataset.subset(val_mask)


def plateau_step(
    best_so_far: float,
    current_val_acc: float,
    stall_counter: int,
    lr: float,
    patience: int,
) -> tuple[float, int, float]:
    """One scheduler update: halve the learning rate after ``patience`` stalls.

    Only strict improvement resets the stall counter; ties count as stalls.
    Returns (new_lr, new_counter, new_best).
    """
    if lr <= 0:
        raise InvalidInputError("lr must be positive")
    if current_val_acc > best_so_far:
        return lr, 0, current_val_acc
    counter = stall_counter + 1
    if counter >= patience:
        return lr / 2.0, 0, best_so_far
    return lr, counter, best_so_far


def evaluate(params: ModelParams, dataset: Dataset) -> float:
    """Clip-level accuracy: average patch softmax per clip, argmax vs clip label."""
    if dataset.n_examples == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    probs = softmax_rows(forward(params, dataset.features))
    clips, inverse, clip_labels = dataset.clip_table()
    sums = np.zeros((clips.size, dataset.num_classes))
    np.add.at(sums, inverse, probs)
    counts = np.bincount(inverse, minlength=clips.size).astype(np.float64)
    predicted = (sums / counts[:, None]).argmax(axis=1)
    return float((predicted == clip_labels).mean())


def _prune_schedule(plan: StagePlan) -> set[int]:
    if plan.strategy != Strategy.PRUNE:
        return set()
    if plan.start_epoch == 0:
        return {0}
    return {plan.start_epoch * (k + 1) for k in range(plan.prune_rounds)}


def train(
    dataset: Dataset, config: TrainConfig, rng: RngStream | None = None
) -> TrainResult:
    """Run the full training protocol on ``dataset``; see the module docstring.

    Returns the parameters of the best-validation epoch (ties resolved to
    the earliest), the per-epoch history, and the prune report when the
    stage plan pruned.
    """
    if dataset.n_examples == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    if rng is None:
        rng = RngStream(config.seed)

    train_split, val_split = stratified_split(
        dataset, config.val_fraction, rng.child(_SPLIT)
    )
    current = train_split
    targets = targets_matrix(current.labels, dataset.num_classes, config.smoothing)

    params = init_params(
        config.architecture,
        dataset.feature_dim,
        dataset.num_classes,
        config.hidden_units,
        rng.child(_INIT),
    )
    adam = _Adam([w.shape for w in params.weights])
    lr = config.initial_lr
    plateau_best = -math.inf
    plateau_counter = 0
    best_val = -math.inf
    best_params = params.copy()
    best_epoch = -1
    stall = 0
    history: list[EpochRecord] = []
    prune_rows: list[PruneRecord] | None = None
    prune_epochs = _prune_schedule(config.stage)
    inter_mixup = (
        config.mixup is not None
        and config.mixup.enabled
        and config.mixup.pairing == Pairing.INTER_BATCH
    )

    for epoch in range(config.max_epochs):
        if epoch in prune_epochs:
            current, targets, rows = _prune_now(params, current, targets, config, epoch)
            prune_rows = (prune_rows or []) + rows

        n = current.n_examples
        order = rng.child(_SHUFFLE).child(epoch).generator().permutation(n)
        partner_order = (
            rng.child(_PARTNER).child(epoch).generator().permutation(n)
            if inter_mixup
            else None
        )

        kept_loss_sum = 0.0
        kept_count = 0
        total_count = 0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            batch = Batch(current.features[idx], targets[idx])
            if config.mixup is not None:
                partner = None
                if inter_mixup:
                    pidx = partner_order[start : start + config.batch_size]
                    partner = Batch(current.features[pidx], targets[pidx])
                batch = apply_mixup(
                    batch,
                    partner,
                    config.mixup,
                    epoch,
                    rng.child(_MIXUP).child(epoch).child(batch_index),
                )

            logits, hidden = _forward_cached(params, batch.features)
            if not np.all(np.isfinite(logits)):
                raise TrainingError("training diverged: non-finite logits", epoch)
            probs = softmax_rows(logits)
            report = batch_losses(
                config.loss, batch.targets, probs, current.example_ids[idx]
            )
            if config.stage.strategy == Strategy.DISCARD:
                keep = discard_mask(
                    report, config.stage.rule, epoch, config.stage.start_epoch
                )
            else:
                keep = np.ones(len(report), dtype=bool)

            n_kept = int(keep.sum())
            logit_grads = (
                loss_gradients_from_probs(config.loss, batch.targets[keep], probs[keep])
                / n_kept
            )
            grads = _param_grads(
                params,
                batch.features[keep],
                logit_grads,
                hidden[keep] if hidden is not None else None,
            )
            adam.step(params.weights, grads, lr)

            kept_loss_sum += float(report.per_example[keep].sum())
            kept_count += n_kept
            total_count += len(report)

        val_acc = evaluate(params, val_split)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=kept_loss_sum / kept_count,
                val_accuracy=val_acc,
                lr=lr,
                kept_fraction=kept_count / total_count,
            )
        )
        if val_acc > best_val:
            best_val = val_acc
            best_params = params.copy()
            best_epoch = epoch
            stall = 0
        else:
            stall += 1
        lr, plateau_counter, plateau_best = plateau_step(
            plateau_best, val_acc, plateau_counter, lr, config.lr_halving_patience
        )
        if stall >= config.early_stop_patience:
            break

    if best_epoch < 0:
        best_params = params
    return TrainResult(best_params, history, prune_rows)


def _prune_now(
    params: ModelParams,
    current: Dataset,
    targets: np.ndarray,
    config: TrainConfig,
    epoch: int,
) -> tuple[Dataset, np.ndarray, list[PruneRecord]]:
    logits = forward(params, current.features)
    if not np.all(np.isfinite(logits)):
        raise TrainingError("training diverged: non-finite logits while pruning", epoch)
    probs = softmax_rows(logits)
    report = batch_losses(config.loss, targets, probs, current.example_ids)
    losses_by_clip = clip_losses(report, current.clip_of_example())
    kept, removed = prune_dataset(current, losses_by_clip, config.stage.prune_count)
    rows = prune_report_rows(losses_by_clip, removed)
    keep_mask = ~np.isin(current.clip_ids, np.asarray(removed, dtype=np.int64))
    return kept, targets[keep_mask], rows


def write_metrics(path, history: list[EpochRecord]) -> None:
    """Append-style epoch metrics, one JSON record per line."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        for record in history:
            fh.write(
                json.dumps(
                    {
                        "epoch": record.epoch,
                        "train_loss": record.train_loss,
                        "val_accuracy": record.val_accuracy,
                        "lr": record.lr,
                        "kept_fraction": record.kept_fraction,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_metrics(path) -> list[EpochRecord]:
    history = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            history.append(
                EpochRecord(
                    epoch=int(record["epoch"]),
                    train_loss=float(record["train_loss"]),
                    val_accuracy=float(record["val_accuracy"]),
                    lr=float(record["lr"]),
                    kept_fraction=float(record["kept_fraction"]),
                )
            )
    return history


def save_model(path, params: ModelParams) -> None:
    """Portable JSON model file: architecture descriptor plus weight arrays."""
    record = {
        "architecture": params.architecture.value,
        "feature_dim": params.feature_dim,
        "num_classes": params.num_classes,
        "hidden_units": params.hidden_units,
        "weights": [w.tolist() for w in params.weights],
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelParams:
    with open(Path(path), "r", encoding="utf-8") as fh:
        record = json.load(fh)
    return ModelParams(
        architecture=Architecture(record["architecture"]),
        feature_dim=int(record["feature_dim"]),
        num_classes=int(record["num_classes"]),
        hidden_units=int(record["hidden_units"]),
        weights=[np.asarray(w, dtype=np.float64) for w in record["weights"]],
    )
