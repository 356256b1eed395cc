"""Synthetic clip/patch datasets, controlled label noise, and experiments.

Data is generated as Gaussian blobs with the clip structure of audio
tagging: class centers sit on a seeded unit sphere, each clip draws a
center near its class center, and each patch draws features near its clip
center. Labels attach to clips. Two kinds of corruption can be injected at
the clip level:

* symmetric in-vocabulary noise, where a clip's label is flipped to a
  uniformly chosen different class (the true label stays inside the class
  set);
* out-of-vocabulary replacement, where a clip's features are replaced by
  draws from a uniform box twice the dataset's per-dimension range while
  its label is kept; the true content then belongs to none of the classes,
  recorded with the ``OOV_CLEAN_LABEL`` sentinel.

Ground truth (clean labels and corruption flags) lives only in
:class:`AnnotatedDataset`; training code receives the plain ``data`` view
and cannot observe it. Experiments run several independent
generate -> corrupt -> train -> evaluate pipelines on seeds derived from
``(base_seed, run_index)`` alone, evaluate on an uncorrupted held-out test
set drawn from the same class centers, and aggregate accuracies as mean
plus a 95% Student-t half-width.

Datasets serialize as line-delimited JSON, one example per line, with
fields ``example_id``, ``clip_id``, ``features``, and ``label``; the
harness-private variant adds ``clean_label`` and ``corrupted``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Mapping

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, ExperimentError, InvalidInputError
from .numerics import RngStream, derive_seed, mean_ci
from .selection import PruneRecord, Strategy
from .smoothing import NoiseGroup
from .trainer import EpochRecord, ModelParams, TrainConfig, evaluate, train

OOV_CLEAN_LABEL = -1

# Stream tags: one independent stream per concern.
_CENTER_STREAM = 101
_CLIP_STREAM = {"train": 102, "test": 103}
_NOISE_STREAM = 104

# Seed-derivation tags for per-run seeds inside an experiment.
_DATA_TAG = 1
_NOISE_TAG = 2
_TRAIN_TAG = 3


class NoiseKind(str, Enum):
    SYMMETRIC_IV = "symmetric"
    OOV_REPLACE = "oov"


@dataclass(frozen=True)
class NoiseSpec:
    """What corruption to inject and how much.

    ``rate`` applies to all clips; ``rate_by_class`` (class index -> rate)
    overrides it per class and must then cover every class. Inside
    ``run_experiment`` the seed is derived per run and this field is
    ignored.
    """

    kind: NoiseKind
    rate: float = 0.0
    seed: int = 0
    rate_by_class: Mapping[int, float] | None = None

    def __post_init__(self):
        rates = [self.rate]
        if self.rate_by_class is not None:
            rates += list(self.rate_by_class.values())
        for rate in rates:
            if not 0.0 <= rate <= 1.0:
                raise InvalidInputError(f"noise rate must lie in [0, 1], got {rate}")


@dataclass(frozen=True)
class AnnotatedDataset:
    """A dataset plus the ground truth that training code must never see."""

    data: Dataset
    clean_labels: np.ndarray  # int64; OOV_CLEAN_LABEL marks out-of-vocabulary content
    corrupted: np.ndarray     # bool

    def __post_init__(self):
        clean = np.asarray(self.clean_labels, dtype=np.int64)
        flags = np.asarray(self.corrupted, dtype=bool)
        object.__setattr__(self, "clean_labels", clean)
        object.__setattr__(self, "corrupted", flags)
        n = self.data.n_examples
        if clean.shape != (n,) or flags.shape != (n,):
            raise InvalidInputError("annotations must align with the dataset rows")
        if n and np.any(self.data.labels[~flags] != clean[~flags]):
            raise InvalidInputError("uncorrupted rows must keep label == clean_label")


def generate_blobs(
    num_classes: int,
    clips_per_class: int,
    patches_per_clip: int,
    feature_dim: int,
    cluster_spread: float,
    seed: int,
    partition: str = "train",
) -> AnnotatedDataset:
    """Clip-structured Gaussian blobs; labels equal the generating class.

    Class centers depend on ``seed`` only, so ``partition="test"`` yields a
    fresh set of clips from the same centers to serve as held-out
    evaluation data.
    """
    if num_classes < 2:
        raise InvalidInputError(f"need at least 2 classes, got {num_classes}")
    if clips_per_class < 1 or patches_per_clip < 1 or feature_dim < 1:
        raise InvalidInputError("counts and feature_dim must be >= 1")
    if cluster_spread < 0:
        raise InvalidInputError(f"cluster_spread must be >= 0, got {cluster_spread}")
    if partition not in _CLIP_STREAM:
        raise InvalidInputError(f"partition must be 'train' or 'test', got {partition!r}")

    center_gen = RngStream(seed, _CENTER_STREAM).generator()
    raw = center_gen.standard_normal((num_classes, feature_dim))
    centers = raw / np.linalg.norm(raw, axis=1, keepdims=True)

    n_clips = num_classes * clips_per_class
    n = n_clips * patches_per_clip
    clip_gen = RngStream(seed, _CLIP_STREAM[partition]).generator()
    clip_offsets = clip_gen.standard_normal((n_clips, feature_dim)) * cluster_spread
    patch_offsets = clip_gen.standard_normal((n, feature_dim)) * cluster_spread

    clip_centers = np.repeat(centers, clips_per_class, axis=0) + clip_offsets
    features = np.repeat(clip_centers, patches_per_clip, axis=0) + patch_offsets
    labels = np.repeat(np.arange(num_classes), clips_per_class * patches_per_clip)
    dataset = Dataset(
        example_ids=np.arange(n),
        clip_ids=np.repeat(np.arange(n_clips), patches_per_clip),
        features=features,
        labels=labels,
        num_classes=num_classes,
    )
    return AnnotatedDataset(dataset, labels.copy(), np.zeros(n, dtype=bool))


def _round_count(x: float) -> int:
    # round-half-up, so rate 0.5 over 3 clips corrupts 2 of them
    return int(math.floor(x + 0.5))


def _clip_view(annotated: AnnotatedDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(clip ids, label, original class, corrupted flag), one entry per clip."""
    clips, first_row = np.unique(annotated.data.clip_ids, return_index=True)
    clip_labels = annotated.data.labels[first_row]
    clean = annotated.clean_labels[first_row]
    flags = annotated.corrupted[first_row]
    original = np.where(clean >= 0, clean, clip_labels)
    return clips, clip_labels, original, flags


def _select_clips(
    annotated: AnnotatedDataset, spec: NoiseSpec, gen: np.random.Generator
) -> np.ndarray:
    """Pick the clips to corrupt: exact counts via seeded shuffle.

    Uniform rate: exactly round(rate * N_clips) over the whole dataset.
    Per-class rates: exactly round(rate_c * N_clips_c) within each class.
    """
    clips, _, original, _ = _clip_view(annotated)
    if spec.rate_by_class is None:
        count = _round_count(spec.rate * clips.size)
        order = gen.permutation(clips.size)
        return np.sort(clips[order[:count]])
    num_classes = annotated.data.num_classes
    missing = [c for c in range(num_classes) if c not in spec.rate_by_class]
    if missing:
        raise ConfigurationError(
            f"rate_by_class must cover every class; missing {missing}"
        )
    selected: list[int] = []
    for cls in range(num_classes):
        class_clips = clips[original == cls]
        count = _round_count(float(spec.rate_by_class[cls]) * class_clips.size)
        order = gen.permutation(class_clips.size)
        selected.extend(int(c) for c in class_clips[order[:count]])
    return np.sort(np.asarray(selected, dtype=np.int64))


def inject_symmetric_noise(annotated: AnnotatedDataset, spec: NoiseSpec) -> AnnotatedDataset:
    """Flip the labels of a seeded-exact subset of clips to other classes."""
    if spec.kind != NoiseKind.SYMMETRIC_IV:
        raise InvalidInputError(f"expected a symmetric noise spec, got {spec.kind}")
    gen = RngStream(spec.seed, _NOISE_STREAM).generator()
    selected = _select_clips(annotated, spec, gen)
    if selected.size == 0:
        return annotated
    labels = annotated.data.labels.copy()
    flags = annotated.corrupted.copy()
    num_classes = annotated.data.num_classes
    draws = gen.integers(0, num_classes - 1, size=selected.size)
    for clip, draw in zip(selected, draws):
        rows = annotated.data.clip_ids == clip
        old = int(labels[rows][0])
        new = int(draw) if draw < old else int(draw) + 1
        labels[rows] = new
        flags[rows] = True
    dataset = replace(annotated.data, labels=labels)
    return AnnotatedDataset(dataset, annotated.clean_labels.copy(), flags)


def inject_oov_noise(annotated: AnnotatedDataset, spec: NoiseSpec) -> AnnotatedDataset:
    """Replace a seeded-exact subset of clips' features with box noise.

    The box spans twice the dataset's per-dimension range, centered on it,
    so replaced features land outside the clean data's bounding box with
    overwhelming probability in moderate dimension. Labels are kept; the
    clean label becomes the out-of-vocabulary sentinel.
    """
    if spec.kind != NoiseKind.OOV_REPLACE:
        raise InvalidInputError(f"expected an oov noise spec, got {spec.kind}")
    gen = RngStream(spec.seed, _NOISE_STREAM).generator()
    selected = _select_clips(annotated, spec, gen)
    if selected.size == 0:
        return annotated
    lo = annotated.data.features.min(axis=0)
    hi = annotated.data.features.max(axis=0)
    center = (lo + hi) / 2.0
    width = hi - lo
    features = annotated.data.features.copy()
    clean = annotated.clean_labels.copy()
    flags = annotated.corrupted.copy()
    rows = np.flatnonzero(np.isin(annotated.data.clip_ids, selected))
    features[rows] = gen.uniform(
        center - width, center + width, size=(rows.size, features.shape[1])
    )
    clean[rows] = OOV_CLEAN_LABEL
    flags[rows] = True
    dataset = replace(annotated.data, features=features)
    return AnnotatedDataset(dataset, clean, flags)


def per_class_corruption_rates(annotated: AnnotatedDataset) -> np.ndarray:
    """Fraction of corrupted clips per original class (clip-level)."""
    _, _, original, flags = _clip_view(annotated)
    rates = np.zeros(annotated.data.num_classes)
    for cls in range(annotated.data.num_classes):
        members = original == cls
        if members.any():
            rates[cls] = float(flags[members].mean())
    return rates


def noise_group_map(annotated: AnnotatedDataset) -> dict[int, NoiseGroup]:
    """Two-group split of the classes by injected corruption rate.

    Classes whose rate falls strictly below the median are LOW_NOISE; the
    rest (median included) are HIGH_NOISE.
    """
    rates = per_class_corruption_rates(annotated)
    median = float(np.median(rates))
    return {
        cls: NoiseGroup.LOW_NOISE if rates[cls] < median else NoiseGroup.HIGH_NOISE
        for cls in range(annotated.data.num_classes)
    }


def prune_precision(
    report: list[PruneRecord], annotated: AnnotatedDataset
) -> float | None:
    """Fraction of removed clips that were actually corrupted; None if none removed."""
    removed = {row.clip_id for row in report if row.removed}
    if not removed:
        return None
    clips, _, _, flags = _clip_view(annotated)
    flag_of_clip = {int(c): bool(f) for c, f in zip(clips, flags)}
    missing = [c for c in removed if c not in flag_of_clip]
    if missing:
        raise InvalidInputError(f"removed clips not present in the dataset: {missing[:5]}")
    return float(np.mean([flag_of_clip[c] for c in sorted(removed)]))


# --- serialization ---------------------------------------------------------


def _public_row(annotated_or_dataset, row: int) -> dict:
    data = (
        annotated_or_dataset.data
        if isinstance(annotated_or_dataset, AnnotatedDataset)
        else annotated_or_dataset
    )
    return {
        "example_id": int(data.example_ids[row]),
        "clip_id": int(data.clip_ids[row]),
        "features": [float(v) for v in data.features[row]],
        "label": int(data.labels[row]),
    }


def _private_rows(annotated: AnnotatedDataset):
    for row in range(annotated.data.n_examples):
        record = _public_row(annotated, row)
        record["clean_label"] = int(annotated.clean_labels[row])
        record["corrupted"] = bool(annotated.corrupted[row])
        yield record


def write_dataset(path, dataset: Dataset) -> None:
    """Public dataset file: no ground-truth fields."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        for row in range(dataset.n_examples):
            fh.write(json.dumps(_public_row(dataset, row), sort_keys=True) + "\n")


def write_annotated(path, annotated: AnnotatedDataset) -> None:
    """Harness-private dataset file including clean labels and flags."""
    with open(Path(path), "w", encoding="utf-8") as fh:
        for record in _private_rows(annotated):
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def _read_rows(path) -> list[dict]:
    rows = []
    with open(Path(path), "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    if not rows:
        raise InvalidInputError(f"dataset file {path} is empty")
    return rows


def _dataset_from_rows(rows: list[dict]) -> Dataset:
    labels = [int(r["label"]) for r in rows]
    clean = [int(r["clean_label"]) for r in rows if "clean_label" in r]
    num_classes = max(labels + [c for c in clean if c >= 0]) + 1
    return Dataset(
        example_ids=np.asarray([int(r["example_id"]) for r in rows], dtype=np.int64),
        clip_ids=np.asarray([int(r["clip_id"]) for r in rows], dtype=np.int64),
        features=np.asarray([r["features"] for r in rows], dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=max(num_classes, 2),
    )


def read_dataset(path) -> Dataset:
    """Read any dataset file as the public view (ground truth dropped)."""
    return _dataset_from_rows(_read_rows(path))


def read_as_annotated(path) -> AnnotatedDataset:
    """Read any dataset file as annotated.

    Files without ground-truth fields are treated as clean: every row keeps
    its label as the clean label and carries a false corruption flag. Use
    :func:`read_annotated` when the annotations must actually be present.
    """
    rows = _read_rows(path)
    if all("clean_label" in r and "corrupted" in r for r in rows):
        return AnnotatedDataset(
            _dataset_from_rows(rows),
            np.asarray([int(r["clean_label"]) for r in rows], dtype=np.int64),
            np.asarray([bool(r["corrupted"]) for r in rows], dtype=bool),
        )
    data = _dataset_from_rows(rows)
    return AnnotatedDataset(data, data.labels.copy(), np.zeros(data.n_examples, dtype=bool))


def read_annotated(path) -> AnnotatedDataset:
    """Read a harness-private dataset file; fails if ground truth is absent."""
    rows = _read_rows(path)
    if any("clean_label" not in r or "corrupted" not in r for r in rows):
        raise InvalidInputError(
            f"{path} is not a harness-private file: clean_label/corrupted missing"
        )
    return AnnotatedDataset(
        _dataset_from_rows(rows),
        np.asarray([int(r["clean_label"]) for r in rows], dtype=np.int64),
        np.asarray([bool(r["corrupted"]) for r in rows], dtype=bool),
    )


def dataset_fingerprint(annotated: AnnotatedDataset) -> str:
    """Content hash of the private serialization (order-sensitive)."""
    digest = hashlib.sha256()
    for record in _private_rows(annotated):
        digest.update(json.dumps(record, sort_keys=True).encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()[:16]


# --- experiments -----------------------------------------------------------


@dataclass(frozen=True)
class DatasetParams:
    num_classes: int = 4
    clips_per_class: int = 50
    patches_per_clip: int = 3
    feature_dim: int = 8
    cluster_spread: float = 0.25
    test_clips_per_class: int = 25

    def __post_init__(self):
        if self.num_classes < 2:
            raise InvalidInputError(f"need at least 2 classes, got {self.num_classes}")
        for name in ("clips_per_class", "patches_per_clip", "feature_dim", "test_clips_per_class"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if self.cluster_spread < 0:
            raise InvalidInputError("cluster_spread must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs: data, noise, method, protocol."""

    dataset: DatasetParams
    train: TrainConfig
    noise: NoiseSpec | None = None
    runs: int = 7
    base_seed: int = 0
    auto_noise_groups: bool = False
    output_dir: str | None = None

    def __post_init__(self):
        if self.runs < 1:
            raise InvalidInputError(f"runs must be >= 1, got {self.runs}")
        if self.auto_noise_groups and self.train.smoothing is None:
            raise ConfigurationError(
                "auto noise groups require a smoothing policy to apply them to"
            )


@dataclass(frozen=True)
class RunSummary:
    per_run_accuracy: tuple[float, ...]  # percent
    mean: float
    ci_half_width: float
    config_fingerprint: str
    dataset_fingerprints: tuple[str, ...]


@dataclass(frozen=True)
class RunResult:
    accuracy: float  # percent, on the clean held-out test set
    history: tuple[EpochRecord, ...]
    params: ModelParams
    prune_report: tuple[PruneRecord, ...] | None
    prune_precision: float | None
    dataset_fingerprint: str


@dataclass(frozen=True)
class ExperimentResult:
    summary: RunSummary
    runs: tuple[RunResult, ...]


def config_fingerprint(cfg: ExperimentConfig) -> str:
    """Stable hash of the fully resolved configuration."""
    from dataclasses import asdict

    canonical = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _single_run(cfg: ExperimentConfig, run_index: int) -> RunResult:
    dp = cfg.dataset
    data_seed = derive_seed(cfg.base_seed, _DATA_TAG, run_index)
    noise_seed = derive_seed(cfg.base_seed, _NOISE_TAG, run_index)
    train_seed = derive_seed(cfg.base_seed, _TRAIN_TAG, run_index)

    train_annotated = generate_blobs(
        dp.num_classes, dp.clips_per_class, dp.patches_per_clip,
        dp.feature_dim, dp.cluster_spread, data_seed, partition="train",
    )
    test_annotated = generate_blobs(
        dp.num_classes, dp.test_clips_per_class, dp.patches_per_clip,
        dp.feature_dim, dp.cluster_spread, data_seed, partition="test",
    )
    if cfg.noise is not None:
        spec = replace(cfg.noise, seed=noise_seed)
        if spec.kind == NoiseKind.SYMMETRIC_IV:
            train_annotated = inject_symmetric_noise(train_annotated, spec)
        else:
            train_annotated = inject_oov_noise(train_annotated, spec)

    train_cfg = cfg.train
    if cfg.auto_noise_groups and train_cfg.smoothing is not None:
        groups = noise_group_map(train_annotated)
        train_cfg = replace(
            train_cfg, smoothing=replace(train_cfg.smoothing, group_of_class=groups)
        )
    train_cfg = replace(train_cfg, seed=train_seed)

    result = train(train_annotated.data, train_cfg, rng=RngStream(train_seed))
    accuracy = 100.0 * evaluate(result.params, test_annotated.data)
    precision = (
        prune_precision(result.prune_report, train_annotated)
        if result.prune_report is not None
        else None
    )
    return RunResult(
        accuracy=accuracy,
        history=tuple(result.history),
        params=result.params,
        prune_report=tuple(result.prune_report) if result.prune_report is not None else None,
        prune_precision=precision,
        dataset_fingerprint=dataset_fingerprint(train_annotated),
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Execute ``cfg.runs`` paired pipelines and aggregate their accuracies.

    Dataset and corruption seeds depend only on (base_seed, run index), so
    two methods run with the same base seed see identical noisy datasets
    run for run.
    """
    runs: list[RunResult] = []
    for run_index in range(cfg.runs):
        try:
            runs.append(_single_run(cfg, run_index))
        except Exception as exc:
            raise ExperimentError(str(exc), run_index) from exc
    accuracies = [run.accuracy for run in runs]
    mean, half_width = mean_ci(accuracies)
    summary = RunSummary(
        per_run_accuracy=tuple(accuracies),
        mean=mean,
        ci_half_width=half_width,
        config_fingerprint=config_fingerprint(cfg),
        dataset_fingerprints=tuple(run.dataset_fingerprint for run in runs),
    )
    return ExperimentResult(summary, tuple(runs))


def write_summary(path, summary: RunSummary) -> None:
    record = {
        "config_fingerprint": summary.config_fingerprint,
        "per_run_accuracy": list(summary.per_run_accuracy),
        "mean": summary.mean,
        "ci_half_width": summary.ci_half_width,
        "dataset_fingerprints": list(summary.dataset_fingerprints),
    }
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_summary(path) -> RunSummary:
    with open(Path(path), "r", encoding="utf-8") as fh:
        record = json.load(fh)
    return RunSummary(
        per_run_accuracy=tuple(float(a) for a in record["per_run_accuracy"]),
        mean=float(record["mean"]),
        ci_half_width=float(record["ci_half_width"]),
        config_fingerprint=str(record["config_fingerprint"]),
        dataset_fingerprints=tuple(str(f) for f in record["dataset_fingerprints"]),
    )
