"""Campaign planning: strategy recommendation, workload and confidence sizing.

The strategy engine walks a fixed set of decision points (class coverage,
pool size, platform, proposals, post-processing) and records every branch it
takes, so a recommendation can be audited step by step. The quantitative
helpers size annotation counts via the Wald normal-approximation interval
for a binomial proportion, with a dedicated approximation for proportions
near one where the normal approximation breaks down.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .labels import ClassDistribution

Z_95 = 1.96

DEFAULT_SPEEDUP_THRESHOLD = 3.0
DEFAULT_DOMINANCE_THRESHOLD = 0.5
DEFAULT_SELF_SUPERVISION_POOL = 100_000


class PostProcessing(enum.Enum):
    CLEVERLABEL = "CLEVERLABEL"
    BLEND_ONLY = "BLEND_ONLY"
    NONE = "NONE"


class PlatformHint(enum.Enum):
    BROWSING_GRID = "BROWSING_GRID"
    SEQUENTIAL = "SEQUENTIAL"


@dataclass(frozen=True)
class StrategyInputs:
    """Facts about the dataset and team that drive the recommendation."""

    n_images: int
    bias_acceptable: bool
    expected_speedup: float
    class_prevalence: ClassDistribution | None = None
    labeled_subset_fraction: float = 0.2
    annotator_pool: int = 1
    per_class_min_fraction: float = 0.01
    raw_pool_size: int | None = None
    # Tunable decision thresholds; defaults follow the recommended values.
    speedup_threshold: float = DEFAULT_SPEEDUP_THRESHOLD
    dominance_threshold: float = DEFAULT_DOMINANCE_THRESHOLD
    self_supervision_pool_threshold: int = DEFAULT_SELF_SUPERVISION_POOL

    def __post_init__(self) -> None:
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self.expected_speedup <= 0:
            raise ValueError("expected_speedup must be positive")
        if not 0.0 <= self.labeled_subset_fraction <= 1.0:
            raise ValueError("labeled_subset_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class RationaleStep:
    decision_point: str
    branch: str
    reason: str


@dataclass(frozen=True)
class StrategyRecommendation:
    use_proposals: bool
    postprocessing: PostProcessing
    platform_hint: PlatformHint
    warnings: tuple[str, ...]
    rationale_trail: tuple[RationaleStep, ...]

    def __post_init__(self) -> None:
        if not self.rationale_trail:
            raise ValueError("rationale_trail must not be empty")
        if self.postprocessing is PostProcessing.CLEVERLABEL and not self.use_proposals:
            raise ValueError("CLEVERLABEL requires proposals")

    def to_dict(self) -> dict:
        return {
            "use_proposals": self.use_proposals,
            "postprocessing": self.postprocessing.value,
            "platform_hint": self.platform_hint.value,
            "warnings": list(self.warnings),
            "rationale_trail": [
                {
                    "decision_point": step.decision_point,
                    "branch": step.branch,
                    "reason": step.reason,
                }
                for step in self.rationale_trail
            ],
        }


def recommend_strategy(inputs: StrategyInputs) -> StrategyRecommendation:
    """Walk the campaign decision points and return an audited recommendation."""
    trail: list[RationaleStep] = []
    warnings: list[str] = []

    # Class coverage: every class should make up at least ~1% of the data,
    # otherwise few/zero-shot approaches deserve a look before annotating.
    if inputs.class_prevalence is not None:
        rare = [
            cls
            for cls, p in enumerate(inputs.class_prevalence.probs)
            if p < inputs.per_class_min_fraction
        ]
        if rare:
            warnings.append(
                f"classes {rare} fall below {inputs.per_class_min_fraction:.0%} "
                "prevalence; consider few/zero-shot approaches for them"
            )
            trail.append(
                RationaleStep(
                    "class-coverage",
                    "rare-classes",
                    f"classes {rare} below the per-class minimum "
                    f"{inputs.per_class_min_fraction:.0%}; warning attached",
                )
            )
        else:
            trail.append(
                RationaleStep(
                    "class-coverage",
                    "adequate",
                    f"all classes reach at least {inputs.per_class_min_fraction:.0%} "
                    "of the data",
                )
            )
    else:
        trail.append(
            RationaleStep(
                "class-coverage",
                "unknown",
                "no class prevalence estimate supplied; coverage not checked",
            )
        )

    # Pool size: very large raw pools suggest self-supervised pretraining on
    # the unlabeled data; advisory only, the recommendation is unchanged.
    if (
        inputs.raw_pool_size is not None
        and inputs.raw_pool_size > inputs.self_supervision_pool_threshold
    ):
        warnings.append(
            f"raw pool of {inputs.raw_pool_size} images exceeds "
            f"{inputs.self_supervision_pool_threshold}; self-supervised "
            "pretraining may reduce the labeling need"
        )
        trail.append(
            RationaleStep(
                "pool-size",
                "self-supervision-advisory",
                f"raw pool {inputs.raw_pool_size} above "
                f"{inputs.self_supervision_pool_threshold}; warning attached",
            )
        )
    else:
        trail.append(
            RationaleStep(
                "pool-size",
                "annotation-scale",
                "raw pool within the range where direct annotation is practical",
            )
        )

    # Platform: a browsing grid pays off when one class dominates, because
    # many same-class images can then be reviewed side by side.
    dominant = (
        inputs.class_prevalence is not None
        and max(inputs.class_prevalence.probs) > inputs.dominance_threshold
    )
    if dominant:
        platform = PlatformHint.BROWSING_GRID
        trail.append(
            RationaleStep(
                "platform",
                "browsing-grid",
                f"largest class at {max(inputs.class_prevalence.probs):.2%} exceeds "
                f"{inputs.dominance_threshold:.0%}; grid review is efficient",
            )
        )
    else:
        platform = PlatformHint.SEQUENTIAL
        trail.append(
            RationaleStep(
                "platform",
                "sequential",
                "no dominant class (or prevalence unknown); sequential review",
            )
        )

    # Proposals: acceptable bias always favors proposals; otherwise the
    # speedup must clear the threshold so the bias can be reversed within
    # a reasonable annotation budget.
    if inputs.bias_acceptable:
        use_proposals = True
        trail.append(
            RationaleStep(
                "proposals",
                "use",
                "proposal bias deemed acceptable; proposals cut annotation cost",
            )
        )
    elif inputs.expected_speedup >= inputs.speedup_threshold:
        use_proposals = True
        trail.append(
            RationaleStep(
                "proposals",
                "use",
                f"bias not acceptable but speedup {inputs.expected_speedup:.4f} "
                f">= {inputs.speedup_threshold}; extra annotations can reverse it",
            )
        )
    else:
        use_proposals = False
        trail.append(
            RationaleStep(
                "proposals",
                "skip",
                f"bias not acceptable and speedup {inputs.expected_speedup:.4f} "
                f"< {inputs.speedup_threshold}; annotate without proposals",
            )
        )

    if use_proposals:
        postprocessing = PostProcessing.CLEVERLABEL
        trail.append(
            RationaleStep(
                "postprocessing",
                "cleverlabel",
                "proposals in use: correct the proposal bias, then blend",
            )
        )
    else:
        postprocessing = PostProcessing.BLEND_ONLY
        trail.append(
            RationaleStep(
                "postprocessing",
                "blend-only",
                "no proposals: blending with the class-confusion prior still helps",
            )
        )

    return StrategyRecommendation(
        use_proposals=use_proposals,
        postprocessing=postprocessing,
        platform_hint=platform,
        warnings=tuple(warnings),
        rationale_trail=tuple(trail),
    )


@dataclass(frozen=True)
class WorkloadInputs:
    """Inputs to the expected-workload formula.

    ``consensus_fraction`` is the expected share of images that stop early
    at ``annotations_consensus``; the rest escalate to ``annotations_full``.
    """

    n_images: int
    consensus_fraction: float
    annotations_consensus: int
    annotations_full: int
    annotations_per_hour: float

    def __post_init__(self) -> None:
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if not 0.0 <= self.consensus_fraction <= 1.0:
            raise ValueError("consensus_fraction must lie in [0, 1]")
        if self.annotations_consensus < 1 or self.annotations_full < 1:
            raise ValueError("annotation counts must be positive")
        if self.annotations_consensus > self.annotations_full:
            raise ValueError("annotations_consensus must not exceed annotations_full")
        if self.annotations_per_hour <= 0:
            raise ValueError("annotations_per_hour must be positive")


@dataclass(frozen=True)
class WorkloadEstimate:
    expected_annotations: float
    hours: float


def estimate_workload(inputs: WorkloadInputs) -> WorkloadEstimate:
    """Expected annotation count and wall-clock hours for one campaign arm."""
    expected = inputs.n_images * (
        inputs.consensus_fraction * inputs.annotations_consensus
        + (1.0 - inputs.consensus_fraction) * inputs.annotations_full
    )
    return WorkloadEstimate(
        expected_annotations=expected,
        hours=expected / inputs.annotations_per_hour,
    )


@dataclass(frozen=True)
class ConfidenceQuery:
    """Query for the confidence-interval helpers.

    Set ``n_annotations`` for wald_interval and ``width`` for
    required_annotations; the other field stays None.
    """

    p: float
    n_annotations: int | None = None
    width: float | None = None
    z: float = Z_95

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise ValueError("p must lie strictly inside (0, 1)")
        if self.z <= 0:
            raise ValueError("z must be positive")


@dataclass(frozen=True)
class WaldInterval:
    lower: float
    upper: float
    width: float


def wald_interval(query: ConfidenceQuery) -> WaldInterval:
    """95% Wald interval around p for a given annotation count.

    ``width`` is twice the half-width before clamping, so it can exceed 1
    for tiny annotation counts; the interval itself is clamped to [0, 1].
    """
    if query.n_annotations is None:
        raise ValueError("wald_interval needs n_annotations")
    if query.n_annotations < 1:
        raise ValueError("n_annotations must be >= 1")
    half = query.z * math.sqrt(query.p * (1.0 - query.p) / query.n_annotations)
    return WaldInterval(
        lower=max(query.p - half, 0.0),
        upper=min(query.p + half, 1.0),
        width=2.0 * half,
    )


def required_annotations(query: ConfidenceQuery) -> int:
    """Annotations needed for a 95% interval of the requested width.

    Returns a ceiling since annotations are integral; a tiny slack keeps
    exact round trips from wald_interval widths from rounding up.
    """
    if query.width is None:
        raise ValueError("required_annotations needs width")
    if not 0.0 < query.width <= 1.0:
        raise ValueError("width must lie in (0, 1]")
    value = 4.0 * query.z**2 * query.p * (1.0 - query.p) / query.width**2
    return math.ceil(value - 1e-9)


@dataclass(frozen=True)
class NearOneInterval:
    lower: float
    upper: float = 1.0


def near_one_interval(n_annotations: int) -> NearOneInterval:
    """95% interval (0.25^(1/A), 1) for proportions close to one.

    The Wald approximation is unreliable for p near 1 with few annotations;
    this closed form replaces it there.
    """
    if n_annotations < 1:
        raise ValueError("n_annotations must be >= 1")
    return NearOneInterval(lower=0.25 ** (1.0 / n_annotations))
