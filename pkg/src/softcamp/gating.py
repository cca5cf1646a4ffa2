"""Annotator qualification and exclusion against the gold subset.

Annotators train on precisely-labeled gold images until they clear the
quality threshold, then annotate for real. Exclusion is an explicit
operator action; a quality alert is raised instead when a qualified
annotator's recent scores slip, so nothing destructive happens
automatically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .labels import macro_accuracy, macro_f1


class GateMetric(enum.Enum):
    MACRO_F1 = "MACRO_F1"
    MACRO_ACCURACY = "MACRO_ACCURACY"


class AnnotatorStatus(enum.Enum):
    TRAINING = "TRAINING"
    QUALIFIED = "QUALIFIED"
    EXCLUDED = "EXCLUDED"


@dataclass(frozen=True)
class GateConfig:
    """Qualification rule: scores of at least ``mu`` on the configured
    metrics, for at least ``required_passing_iterations`` iterations,
    covering both proposal modes when ``require_both_modes`` is set."""

    mu: float = 0.6
    required_passing_iterations: int = 2
    metrics: frozenset[GateMetric] = frozenset(
        {GateMetric.MACRO_F1, GateMetric.MACRO_ACCURACY}
    )
    require_both_modes: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if self.required_passing_iterations < 1:
            raise ValueError("required_passing_iterations must be >= 1")
        if not self.metrics:
            raise ValueError("at least one gate metric required")


@dataclass(frozen=True)
class IterationScore:
    """Scores from one training iteration on the gold subset."""

    iteration_id: str
    with_proposals: bool
    macro_f1: float
    macro_accuracy: float
    minutes_spent: float = 0.0

    def __post_init__(self) -> None:
        for name in ("macro_f1", "macro_accuracy"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def metric(self, which: GateMetric) -> float:
        return self.macro_f1 if which is GateMetric.MACRO_F1 else self.macro_accuracy

    def passes(self, cfg: GateConfig) -> bool:
        return all(self.metric(m) >= cfg.mu for m in cfg.metrics)


@dataclass(frozen=True)
class AnnotatorLedger:
    annotator_id: str
    iterations: tuple[IterationScore, ...] = ()
    status: AnnotatorStatus = AnnotatorStatus.TRAINING


def score_iteration(
    records, gold: dict[str, int], k: int
) -> dict[str, float]:
    """Score one iteration's records against the gold labels."""
    records = list(records)
    if not records:
        raise ValueError("no records to score")
    predictions = []
    truths = []
    for rec in records:
        if rec.image_id not in gold:
            raise ValueError(f"image {rec.image_id!r} has no gold label")
        rec.check_classes(k)
        predictions.append(rec.chosen_class)
        truths.append(gold[rec.image_id])
    return {
        "macro_f1": macro_f1(predictions, truths, k),
        "macro_accuracy": macro_accuracy(predictions, truths, k),
    }


def update_status(
    ledger: AnnotatorLedger, iteration: IterationScore, cfg: GateConfig
) -> AnnotatorLedger:
    """Append an iteration and recompute status.

    Qualification is monotone: once QUALIFIED, further iterations never
    demote (only exclude() does).
    """
    if ledger.status is AnnotatorStatus.EXCLUDED:
        raise ValueError(f"annotator {ledger.annotator_id!r} is excluded")
    iterations = ledger.iterations + (iteration,)
    status = ledger.status
    if status is AnnotatorStatus.TRAINING and _qualifies(iterations, cfg):
        status = AnnotatorStatus.QUALIFIED
    return replace(ledger, iterations=iterations, status=status)


def _qualifies(iterations: tuple[IterationScore, ...], cfg: GateConfig) -> bool:
    passing = [it for it in iterations if it.passes(cfg)]
    if len(passing) < cfg.required_passing_iterations:
        return False
    if cfg.require_both_modes:
        modes = {it.with_proposals for it in passing}
        if modes != {True, False}:
            return False
    return True


def exclude(ledger: AnnotatorLedger) -> AnnotatorLedger:
    """Operator action: exclude the annotator terminally."""
    return replace(ledger, status=AnnotatorStatus.EXCLUDED)


def quality_alert(ledger: AnnotatorLedger, cfg: GateConfig) -> bool:
    """Advisory flag: a qualified annotator's rolling 3-iteration mean fell
    below mu on some configured metric."""
    if ledger.status is not AnnotatorStatus.QUALIFIED or not ledger.iterations:
        return False
    window = ledger.iterations[-3:]
    return any(
        float(np.mean([it.metric(m) for it in window])) < cfg.mu
        for m in cfg.metrics
    )


@dataclass(frozen=True)
class LearningPoint:
    iteration_index: int
    with_proposals: bool
    delta_f1_vs_first3: float
    minutes_delta: float


def learning_curve(ledger: AnnotatorLedger) -> list[LearningPoint]:
    """Rolling comparison of recent iterations against the first three.

    Per proposal mode: delta of the trailing up-to-3-iteration F1 mean
    (and minutes mean) against the mode's first up-to-3 iterations.
    Indices refer to positions in the full ledger.
    """
    if not ledger.iterations:
        raise ValueError("ledger has no iterations")
    points: list[LearningPoint] = []
    for mode in (False, True):
        indexed = [
            (idx, it)
            for idx, it in enumerate(ledger.iterations)
            if it.with_proposals is mode
        ]
        if not indexed:
            continue
        f1_first = float(np.mean([it.macro_f1 for _, it in indexed[:3]]))
        min_first = float(np.mean([it.minutes_spent for _, it in indexed[:3]]))
        for pos, (idx, _) in enumerate(indexed):
            window = [it for _, it in indexed[max(0, pos - 2) : pos + 1]]
            points.append(
                LearningPoint(
                    iteration_index=idx,
                    with_proposals=mode,
                    delta_f1_vs_first3=float(
                        np.mean([it.macro_f1 for it in window]) - f1_first
                    ),
                    minutes_delta=float(
                        np.mean([it.minutes_spent for it in window]) - min_first
                    ),
                )
            )
    points.sort(key=lambda p: p.iteration_index)
    return points
