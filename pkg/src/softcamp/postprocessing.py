"""Post-processing of proposal-guided annotations.

Annotating with a class proposal visible skews the empirical distribution
toward the proposed class (the default effect). The acceptance model here is
the affine mixture

    observed = (1 - delta) * truth + delta * one_hot(proposal)

where ``delta`` is the dataset-specific probability of accepting the
proposal regardless of content. Bias correction inverts that mixture;
class blending shrinks the empirical distribution toward a class-confusion
prior while annotation counts are small. Their composition (correct, then
blend) is applied to proposal-guided annotations; blending alone is the
recommended treatment for annotations gathered without proposals.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .labels import (
    ClassDistribution,
    ConfusionMatrix,
    ImageLabelSet,
    aggregate,
    majority_vote,
)


class Method(enum.Enum):
    """Post-processing applied to one image's annotations."""

    RAW = "RAW"
    CLEVERLABEL = "CLEVERLABEL"
    BLEND_ONLY = "BLEND_ONLY"
    BIAS_CORRECT_ONLY = "BIAS_CORRECT_ONLY"

    @property
    def needs_proposals(self) -> bool:
        return self in (Method.CLEVERLABEL, Method.BIAS_CORRECT_ONLY)


@dataclass(frozen=True)
class BiasModel:
    """Dataset-specific proposal-acceptance offset.

    0 means proposals have no influence; values approaching 1 mean the
    proposal is (almost) always accepted. Exactly 1 is rejected because the
    correction would be undefined.
    """

    delta: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class PostprocessConfig:
    bias: BiasModel
    confusion: ConfusionMatrix
    # Blend weight is lam = A / (A + beta): more annotations, more trust in
    # the empirical distribution.
    blend_weight_beta: float = 2.0
    # With this many annotations the empirical distribution is accurate
    # enough that blending is skipped outright.
    skip_blend_threshold: int = 50

    def __post_init__(self) -> None:
        if self.blend_weight_beta <= 0:
            raise ValueError("blend_weight_beta must be positive")
        if self.skip_blend_threshold < 1:
            raise ValueError("skip_blend_threshold must be >= 1")

    @property
    def k(self) -> int:
        return self.confusion.k


def simulate_acceptance(
    gt: ClassDistribution, proposal: int, bias: BiasModel
) -> ClassDistribution:
    """Expected annotation distribution when ``proposal`` is shown."""
    if not 0 <= proposal < gt.k:
        raise ValueError(f"proposal {proposal} out of range for K={gt.k}")
    out = (1.0 - bias.delta) * gt.as_array()
    out[proposal] += bias.delta
    return ClassDistribution(tuple(out))


def bias_correct(
    observed: ClassDistribution, proposal: int, bias: BiasModel
) -> ClassDistribution:
    """Invert the acceptance model to recover the unbiased distribution.

    Sampled observations can dip below ``delta`` at the proposal, which
    makes the algebraic inverse negative there; negative entries are
    clipped to zero and the result renormalized.
    """
    if not 0 <= proposal < observed.k:
        raise ValueError(f"proposal {proposal} out of range for K={observed.k}")
    corrected = observed.as_array()
    corrected[proposal] -= bias.delta
    corrected /= 1.0 - bias.delta
    corrected = np.maximum(corrected, 0.0)
    total = corrected.sum()
    if total <= 0.0:
        # Only reachable when observed is one-hot at the proposal and the
        # correction removes all mass; keep the proposal in that case.
        return ClassDistribution.one_hot(proposal, observed.k)
    return ClassDistribution(tuple(corrected / total))


def class_blend(
    dist: ClassDistribution,
    anchor: int,
    confusion: ConfusionMatrix,
    n_annotations: int,
    cfg: PostprocessConfig,
) -> ClassDistribution:
    """Shrink ``dist`` toward the confusion row of the anchor class.

    The blend weight lam = A / (A + beta) approaches 1 as annotations
    accumulate; at ``skip_blend_threshold`` annotations the distribution is
    returned unchanged.
    """
    if not 0 <= anchor < dist.k:
        raise ValueError(f"anchor {anchor} out of range for K={dist.k}")
    if confusion.k != dist.k:
        raise ValueError(f"K mismatch: confusion {confusion.k} vs dist {dist.k}")
    if n_annotations < 1:
        raise ValueError("n_annotations must be >= 1")
    if n_annotations >= cfg.skip_blend_threshold:
        return dist
    lam = n_annotations / (n_annotations + cfg.blend_weight_beta)
    prior = np.asarray(confusion.rows[anchor], dtype=float)
    out = lam * dist.as_array() + (1.0 - lam) * prior
    return ClassDistribution(tuple(out))


def cleverlabel(labels: ImageLabelSet, cfg: PostprocessConfig) -> ClassDistribution:
    """Bias-correct then blend proposal-guided annotations for one image.

    All records must share one proposal; use blend_only for annotations
    gathered without proposals.
    """
    proposal = labels.shared_proposal()
    observed = aggregate(labels, cfg.k)
    corrected = bias_correct(observed, proposal, cfg.bias)
    return class_blend(corrected, proposal, cfg.confusion, len(labels.records), cfg)


def blend_only(labels: ImageLabelSet, cfg: PostprocessConfig) -> ClassDistribution:
    """Blend plain annotations toward the majority class's confusion row."""
    observed = aggregate(labels, cfg.k)
    anchor = majority_vote(observed)
    return class_blend(observed, anchor, cfg.confusion, len(labels.records), cfg)


def apply_method(
    labels: ImageLabelSet, method: Method, cfg: PostprocessConfig
) -> ClassDistribution:
    """Apply one post-processing method to one image's annotations.

    Shared by the simulator, the campaign-service export, and the offline
    CLI so every surface produces identical numbers.
    """
    if method is Method.RAW:
        return aggregate(labels, cfg.k)
    if method is Method.CLEVERLABEL:
        return cleverlabel(labels, cfg)
    if method is Method.BLEND_ONLY:
        return blend_only(labels, cfg)
    if method is Method.BIAS_CORRECT_ONLY:
        proposal = labels.shared_proposal()
        return bias_correct(aggregate(labels, cfg.k), proposal, cfg.bias)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class DeltaPair:
    """One image's empirical distributions from both campaign arms."""

    proposal: int
    p_with: ClassDistribution
    p_without: ClassDistribution

    def __post_init__(self) -> None:
        if self.p_with.k != self.p_without.k:
            raise ValueError("p_with and p_without must share K")
        if not 0 <= self.proposal < self.p_with.k:
            raise ValueError(
                f"proposal {self.proposal} out of range for K={self.p_with.k}"
            )


def estimate_delta(pairs: list[DeltaPair] | tuple[DeltaPair, ...]) -> float:
    """Estimate the acceptance offset from with/without-proposal pairs.

    Each pair yields delta_i = (p_with[rho] - p_without[rho]) /
    (1 - p_without[rho]), clipped to [0, 1]; pairs whose without-proposal
    mass at the proposal is already 1 carry no information and are skipped.
    Returns the mean over the remaining pairs.
    """
    if not pairs:
        raise ValueError("no pairs")
    estimates = []
    for pair in pairs:
        base = pair.p_without.probs[pair.proposal]
        if base >= 1.0:
            continue
        raw = (pair.p_with.probs[pair.proposal] - base) / (1.0 - base)
        estimates.append(min(max(raw, 0.0), 1.0))
    if not estimates:
        raise ValueError("all pairs degenerate (p_without at proposal is 1)")
    return float(np.mean(estimates))


def estimate_confusion(label_sets, k: int) -> ConfusionMatrix:
    """Approximate the class-confusion matrix from no-proposal annotations.

    Counts (majority class -> annotated class) transitions across images and
    row-normalizes. Classes never observed as a majority keep an identity
    row, which leaves blending a no-op for them.
    """
    counts = np.zeros((k, k), dtype=float)
    seen_any = False
    for labels in label_sets:
        if not labels.records:
            continue
        seen_any = True
        majority = majority_vote(aggregate(labels, k))
        for rec in labels.records:
            counts[majority, rec.chosen_class] += 1.0
    if not seen_any:
        raise ValueError("no annotated images")
    rows = []
    for j in range(k):
        total = counts[j].sum()
        if total > 0:
            rows.append(tuple(counts[j] / total))
        else:
            rows.append(tuple(1.0 if i == j else 0.0 for i in range(k)))
    return ConfusionMatrix(tuple(rows))
