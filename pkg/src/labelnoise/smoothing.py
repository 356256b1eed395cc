"""Label smoothing: uniform soft targets and a noise-aware two-group variant.

Uniform smoothing replaces a one-hot target for class ``t`` with

    y'(k) = (1 - eps) * [k == t] + eps / K

so the active class keeps ``(1 - eps) + eps/K`` and every other class gets
``eps/K``. The two-group policy assigns a lower effective epsilon
(``eps - delta``) to classes believed to carry little label noise and a
higher one (``eps + delta``) to noisy classes, on the theory that cleaner
labels deserve less flattening.

Smoothing is applied once, at dataset preparation, before any mixup.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .errors import ConfigurationError, InvalidInputError


class NoiseGroup(str, Enum):
    LOW_NOISE = "low"
    HIGH_NOISE = "high"


@dataclass(frozen=True)
class SmoothingPolicy:
    """Smoothing strength, optionally differentiated by per-class noise group.

    Without a group map every class is smoothed with ``epsilon``. With one,
    classes mapped to ``LOW_NOISE`` use ``epsilon - delta_epsilon`` and
    classes mapped to ``HIGH_NOISE`` use ``epsilon + delta_epsilon``.
    """

    epsilon: float
    delta_epsilon: float = 0.0
    group_of_class: Mapping[int, NoiseGroup] | None = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise InvalidInputError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.delta_epsilon < 0.0:
            raise InvalidInputError(
                f"delta_epsilon must be non-negative, got {self.delta_epsilon}"
            )
        if self.epsilon - self.delta_epsilon < 0.0 or self.epsilon + self.delta_epsilon >= 1.0:
            raise InvalidInputError(
                "epsilon +/- delta_epsilon must stay within [0, 1): "
                f"got epsilon={self.epsilon}, delta_epsilon={self.delta_epsilon}"
            )

    def effective_epsilon(self, target_class: int) -> float:
        if self.group_of_class is None:
            return self.epsilon
        group = self.group_of_class.get(target_class)
        if group is None:
            raise ConfigurationError(
                f"class {target_class} is missing from the noise-group map"
            )
        if group == NoiseGroup.LOW_NOISE:
            return self.epsilon - self.delta_epsilon
        return self.epsilon + self.delta_epsilon


def smooth_uniform(target_class: int, num_classes: int, epsilon: float) -> np.ndarray:
    """Smoothed target distribution for ``target_class`` over ``num_classes``."""
    if num_classes < 2:
        raise InvalidInputError(f"need at least 2 classes, got {num_classes}")
    if not 0 <= target_class < num_classes:
        raise InvalidInputError(
            f"target class {target_class} outside [0, {num_classes})"
        )
    if not 0.0 <= epsilon < 1.0:
        raise InvalidInputError(f"epsilon must lie in [0, 1), got {epsilon}")
    out = np.full(num_classes, epsilon / num_classes, dtype=np.float64)
    out[target_class] = (1.0 - epsilon) + epsilon / num_classes
    return out


def smooth_with_policy(
    target_class: int, num_classes: int, policy: SmoothingPolicy
) -> np.ndarray:
    """Apply the policy's effective epsilon for this class, then smooth."""
    return smooth_uniform(
        target_class, num_classes, policy.effective_epsilon(target_class)
    )


def targets_matrix(
    labels, num_classes: int, policy: SmoothingPolicy | None = None
) -> np.ndarray:
    """Stack per-example target rows: one-hot when ``policy`` is None.

    The row for a given class is identical across examples, so rows are
    built once per class and gathered.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InvalidInputError("labels outside [0, num_classes)")
    rows = np.empty((num_classes, num_classes), dtype=np.float64)
    for cls in range(num_classes):
        if policy is None:
            row = np.zeros(num_classes, dtype=np.float64)
            row[cls] = 1.0
        else:
            row = smooth_with_policy(cls, num_classes, policy)
        rows[cls] = row
    return rows[labels]
