"""Large-loss instance rejection: thresholds, mini-batch discard, pruning.

Training is treated as two stages. For the first ``start_epoch`` completed
epochs every instance participates. Afterwards a selection rule converts
the batch's loss values into a rejection threshold (either a fraction of
the largest loss or a percentile) and instances above it are dropped from
the gradient update (DISCARD), or the train set itself is pruned once by
removing the highest-loss clips (PRUNE). Patch losses aggregate to clip
losses by arithmetic mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, InvalidInputError
from .losses import LossReport
from .numerics import percentile


class SelectionKind(str, Enum):
    MAX_FRACTION = "max_fraction"
    PERCENTILE = "percentile"


@dataclass(frozen=True)
class SelectionRule:
    """Threshold rule: ``fraction * max(losses)`` or ``percentile(losses, level)``."""

    kind: SelectionKind
    fraction: float | None = None
    level: float | None = None

    def __post_init__(self):
        if self.kind == SelectionKind.MAX_FRACTION:
            if self.fraction is None or not 0.0 <= self.fraction <= 1.0:
                raise InvalidInputError(
                    f"max-fraction rule needs fraction in [0, 1], got {self.fraction}"
                )
        elif self.kind == SelectionKind.PERCENTILE:
            if self.level is None or not 0.0 <= self.level <= 100.0:
                raise InvalidInputError(
                    f"percentile rule needs level in [0, 100], got {self.level}"
                )
        else:
            raise InvalidInputError(f"unknown selection kind {self.kind!r}")

    @classmethod
    def max_fraction(cls, fraction: float) -> "SelectionRule":
        return cls(SelectionKind.MAX_FRACTION, fraction=fraction)

    @classmethod
    def at_percentile(cls, level: float) -> "SelectionRule":
        return cls(SelectionKind.PERCENTILE, level=level)


class Strategy(str, Enum):
    NONE = "none"
    DISCARD = "discard"
    PRUNE = "prune"


@dataclass(frozen=True)
class StagePlan:
    """When and how stage-two selection kicks in.

    ``start_epoch`` counts completed epochs: discarding first applies in
    epoch ``start_epoch``, and pruning runs right before it. With
    ``prune_rounds > 1`` pruning repeats every ``start_epoch`` epochs
    (an optional iterative mode; single-shot is the default).
    """

    strategy: Strategy = Strategy.NONE
    start_epoch: int = 0
    rule: SelectionRule | None = None
    prune_count: int = 0
    prune_rounds: int = 1

    def __post_init__(self):
        if self.start_epoch < 0:
            raise InvalidInputError(f"start_epoch must be >= 0, got {self.start_epoch}")
        if self.strategy == Strategy.DISCARD and self.rule is None:
            raise ConfigurationError("discard strategy requires a selection rule")
        if self.prune_count < 0:
            raise InvalidInputError(f"prune_count must be >= 0, got {self.prune_count}")
        if self.prune_rounds < 1:
            raise InvalidInputError(f"prune_rounds must be >= 1, got {self.prune_rounds}")
        if self.prune_rounds > 1 and self.start_epoch == 0:
            raise ConfigurationError("iterative pruning requires start_epoch >= 1")


def threshold_from_rule(losses, rule: SelectionRule) -> float:
    """Rejection threshold for a non-empty array of non-negative losses."""
    values = np.asarray(losses, dtype=np.float64)
    if values.size == 0:
        raise InvalidInputError("cannot derive a threshold from an empty loss array")
    if not np.all(np.isfinite(values)) or values.min() < 0:
        raise InvalidInputError("losses must be finite and non-negative")
    if rule.kind == SelectionKind.MAX_FRACTION:
        return float(rule.fraction * values.max())
    return percentile(values, rule.level)


def discard_mask(
    losses: LossReport, rule: SelectionRule, epoch: int, start_epoch: int
) -> np.ndarray:
    """Keep-mask for one batch (True = keep).

    Before ``start_epoch`` completed epochs everything is kept. Afterwards
    instances with loss above the rule's threshold are rejected, except
    that a batch never rejects everything: if it would, the instances
    attaining the minimum loss are kept instead.
    """
    if len(losses) == 0:
        raise InvalidInputError("cannot build a mask for an empty loss report")
    values = losses.per_example
    if epoch < start_epoch:
        return np.ones(len(losses), dtype=bool)
    keep = values <= threshold_from_rule(values, rule)
    if not keep.any():
        keep = values == values.min()
    return keep


def clip_losses(
    patch_losses: LossReport, clip_of_example: Mapping[int, int]
) -> dict[int, float]:
    """Arithmetic mean of patch losses per clip."""
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for example_id, value in zip(patch_losses.example_ids, patch_losses.per_example):
        key = int(example_id)
        if key not in clip_of_example:
            raise ConfigurationError(f"example {key} has no clip assignment")
        clip = int(clip_of_example[key])
        sums[clip] = sums.get(clip, 0.0) + float(value)
        counts[clip] = counts.get(clip, 0) + 1
    return {clip: sums[clip] / counts[clip] for clip in sums}


def _removal_order(clip_loss_map: Mapping[int, float]) -> list[int]:
    # Largest loss first; among equal losses the higher clip id goes first,
    # so lower ids survive longest.
    return sorted(clip_loss_map, key=lambda clip: (-clip_loss_map[clip], -clip))


def prune_dataset(
    dataset: Dataset, clip_loss_map: Mapping[int, float], prune_count: int
) -> tuple[Dataset, list[int]]:
    """Drop the ``prune_count`` highest-loss clips from the dataset.

    Every clip in the dataset must have a loss entry. Returns the kept
    dataset (original row order) and the removed clip ids, highest loss
    first.
    """
    clips = np.unique(dataset.clip_ids)
    if prune_count >= clips.size:
        raise InvalidInputError(
            f"prune_count {prune_count} must be smaller than the clip count {clips.size}"
        )
    missing = [int(c) for c in clips if int(c) not in clip_loss_map]
    if missing:
        raise ConfigurationError(f"clips without a loss entry: {missing[:5]}")
    if prune_count == 0:
        return dataset, []
    scored = {int(c): float(clip_loss_map[int(c)]) for c in clips}
    removed = _removal_order(scored)[:prune_count]
    keep_mask = ~np.isin(dataset.clip_ids, np.asarray(removed, dtype=np.int64))
    return dataset.subset(keep_mask), removed


@dataclass(frozen=True)
class PruneRecord:
    """One line of a prune report: a clip's loss-based rank and fate."""

    clip_id: int
    clip_loss: float
    rank: int
    removed: bool


def prune_report_rows(
    clip_loss_map: Mapping[int, float], removed: Sequence[int]
) -> list[PruneRecord]:
    """Report rows for every scored clip, ranked by removal order (rank 1 first)."""
    removed_set = set(int(c) for c in removed)
    rows = []
    for rank, clip in enumerate(_removal_order(clip_loss_map), start=1):
        rows.append(
            PruneRecord(int(clip), float(clip_loss_map[clip]), rank, clip in removed_set)
        )
    return rows


def write_prune_report(path, rows: Sequence[PruneRecord]) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        for row in rows:
            record = {
                "clip_id": row.clip_id,
                "clip_loss": row.clip_loss,
                "rank": row.rank,
                "removed": row.removed,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_prune_report(path) -> list[PruneRecord]:
    rows = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            rows.append(
                PruneRecord(
                    int(record["clip_id"]),
                    float(record["clip_loss"]),
                    int(record["rank"]),
                    bool(record["removed"]),
                )
            )
    return rows
