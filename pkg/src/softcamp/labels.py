"""Soft/hard label types and the metrics used to judge label quality.

A soft label is a probability distribution over the K campaign classes,
typically obtained by averaging several annotations of the same image. A
hard label is the one-hot special case. Everything in this module is a pure
function over immutable values.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

# Tolerance for the sum-to-1 invariant of probability vectors.
PROB_ATOL = 1e-9

# Floor applied to estimate entries before computing KL, so that zero
# probabilities in the estimate never produce infinite divergence.
KL_EPS = 1e-8


@dataclass(frozen=True)
class ClassDistribution:
    """Normalized probability vector over K classes (K >= 2)."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError(f"need at least 2 classes, got {len(probs)}")
        if any(p < 0.0 or p > 1.0 for p in probs):
            raise ValueError(f"probabilities must lie in [0, 1]: {probs}")
        total = math.fsum(probs)
        if abs(total - 1.0) > PROB_ATOL:
            raise ValueError(f"probabilities must sum to 1 (got {total!r})")

    @property
    def k(self) -> int:
        return len(self.probs)

    @classmethod
    def from_unnormalized(cls, weights) -> "ClassDistribution":
        """Build a distribution from nonnegative weights, renormalizing."""
        arr = np.asarray(weights, dtype=float)
        if arr.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        if np.any(arr < 0):
            raise ValueError("weights must be nonnegative")
        total = float(arr.sum())
        if total <= 0.0:
            raise ValueError("weights sum to zero")
        return cls(tuple(arr / total))

    @classmethod
    def one_hot(cls, cls_index: int, k: int) -> "ClassDistribution":
        if not 0 <= cls_index < k:
            raise ValueError(f"class {cls_index} out of range for K={k}")
        return cls(tuple(1.0 if i == cls_index else 0.0 for i in range(k)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's class choice for one image.

    ``proposal_shown`` is the class suggested during annotation, or None if
    the image was annotated without a proposal.
    """

    image_id: str
    annotator_id: str
    chosen_class: int
    proposal_shown: int | None = None
    timestamp_ms: int = 0
    batch_id: str = ""

    def __post_init__(self) -> None:
        if self.chosen_class < 0:
            raise ValueError("chosen_class must be nonnegative")
        if self.proposal_shown is not None and self.proposal_shown < 0:
            raise ValueError("proposal_shown must be nonnegative")
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be nonnegative")

    def check_classes(self, k: int) -> None:
        """Validate class indices against a campaign's K."""
        if self.chosen_class >= k:
            raise ValueError(
                f"chosen_class {self.chosen_class} out of range for K={k}"
            )
        if self.proposal_shown is not None and self.proposal_shown >= k:
            raise ValueError(
                f"proposal_shown {self.proposal_shown} out of range for K={k}"
            )


@dataclass(frozen=True)
class ImageLabelSet:
    """All annotation records collected for one image."""

    image_id: str
    records: tuple[AnnotationRecord, ...]

    def __post_init__(self) -> None:
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        for rec in records:
            if rec.image_id != self.image_id:
                raise ValueError(
                    f"record for {rec.image_id!r} in set for {self.image_id!r}"
                )

    @property
    def proposals_shown(self) -> set[int | None]:
        return {rec.proposal_shown for rec in self.records}

    @property
    def has_mixed_proposals(self) -> bool:
        """True when records mix different proposals (or proposal/none)."""
        return len(self.proposals_shown) > 1

    def shared_proposal(self) -> int:
        """The single proposal shown on every record.

        Raises ValueError when records are missing a proposal or mix
        different proposals.
        """
        shown = self.proposals_shown
        if shown == {None} or not shown:
            raise ValueError(f"image {self.image_id!r} has no proposals")
        if len(shown) > 1:
            raise ValueError(
                f"image {self.image_id!r} mixes proposals {sorted(map(str, shown))}"
            )
        (proposal,) = shown
        return proposal


@dataclass(frozen=True)
class ConfusionMatrix:
    """K x K row-stochastic class-transition matrix.

    Row j is the class distribution observed when the reference class is j;
    used as the blending prior in post-processing.
    """

    rows: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        rows = tuple(tuple(float(v) for v in row) for row in self.rows)
        object.__setattr__(self, "rows", rows)
        k = len(rows)
        if k < 2:
            raise ValueError("confusion matrix needs K >= 2")
        for j, row in enumerate(rows):
            if len(row) != k:
                raise ValueError(f"row {j} has length {len(row)}, expected {k}")
            if any(v < 0.0 or v > 1.0 for v in row):
                raise ValueError(f"row {j} has entries outside [0, 1]")
            total = math.fsum(row)
            if abs(total - 1.0) > PROB_ATOL:
                raise ValueError(f"row {j} sums to {total!r}, expected 1")

    @property
    def k(self) -> int:
        return len(self.rows)

    @classmethod
    def identity(cls, k: int) -> "ConfusionMatrix":
        return cls(tuple(tuple(1.0 if i == j else 0.0 for j in range(k)) for i in range(k)))

    def row(self, j: int) -> ClassDistribution:
        if not 0 <= j < self.k:
            raise ValueError(f"row {j} out of range for K={self.k}")
        return ClassDistribution(self.rows[j])

    def as_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float)


def aggregate(labels: ImageLabelSet, k: int) -> ClassDistribution:
    """Average annotations into a soft label: probs[c] = count(c) / total."""
    if not labels.records:
        raise ValueError("no annotations")
    counts = np.zeros(k, dtype=float)
    for rec in labels.records:
        rec.check_classes(k)
        counts[rec.chosen_class] += 1.0
    return ClassDistribution(tuple(counts / len(labels.records)))


def majority_vote(dist: ClassDistribution) -> int:
    """Argmax class; ties break toward the lowest class index."""
    return int(np.argmax(dist.probs))


def uncertainty(dist: ClassDistribution) -> float:
    """1 - max probability: 0 for a hard label, 1 - 1/K for uniform."""
    return 1.0 - max(dist.probs)


def kl_divergence(reference: ClassDistribution, estimate: ClassDistribution) -> float:
    """KL(reference || estimate) in nats.

    Estimate entries are floored at KL_EPS and renormalized first, so the
    result is always finite. Zero reference entries contribute nothing.
    """
    if reference.k != estimate.k:
        raise ValueError(f"K mismatch: {reference.k} vs {estimate.k}")
    est = np.maximum(estimate.as_array(), KL_EPS)
    est /= est.sum()
    ref = reference.as_array()
    mask = ref > 0.0
    value = float(np.sum(ref[mask] * np.log(ref[mask] / est[mask])))
    # Guard against tiny negative round-off when reference == estimate.
    return max(value, 0.0)


def _check_label_lists(predictions, truths, k: int) -> None:
    if len(predictions) == 0 or len(truths) == 0:
        raise ValueError("empty label lists")
    if len(predictions) != len(truths):
        raise ValueError(
            f"length mismatch: {len(predictions)} predictions vs {len(truths)} truths"
        )
    for value in predictions:
        if not 0 <= value < k:
            raise ValueError(f"prediction {value} out of range for K={k}")
    for value in truths:
        if not 0 <= value < k:
            raise ValueError(f"truth {value} out of range for K={k}")


def macro_f1(predictions, truths, k: int) -> float:
    """Unweighted mean of per-class F1.

    Classes absent from both predictions and truths have undefined
    precision/recall and are excluded from the mean.
    """
    _check_label_lists(predictions, truths, k)
    pred_counts = Counter(predictions)
    truth_counts = Counter(truths)
    tp = Counter(p for p, t in zip(predictions, truths) if p == t)
    scores = []
    for cls in range(k):
        if pred_counts[cls] == 0 and truth_counts[cls] == 0:
            continue
        denom = pred_counts[cls] + truth_counts[cls]
        scores.append(2.0 * tp[cls] / denom if denom else 0.0)
    if not scores:
        raise ValueError("no classes present in predictions or truths")
    return float(np.mean(scores))


def macro_accuracy(predictions, truths, k: int) -> float:
    """Unweighted mean of per-class recall over classes present in truths."""
    _check_label_lists(predictions, truths, k)
    truth_counts = Counter(truths)
    tp = Counter(p for p, t in zip(predictions, truths) if p == t)
    recalls = [
        tp[cls] / truth_counts[cls] for cls in range(k) if truth_counts[cls] > 0
    ]
    if not recalls:
        raise ValueError("no classes present in truths")
    return float(np.mean(recalls))
