"""Scenario files: one JSON document describing a planning/simulation run.

Sections (all optional unless a command needs them):

    strategy    inputs for the recommendation engine
    workload    inputs for the workload formula
    dataset     synthetic dataset, inline images or generator parameters
    annotators  simulated annotator profiles
    campaign    full campaign configuration
    methods     post-processing methods to score
    sweep       equal-cost strategy sweep grid
    bias_probe  proposal-bias measurement over a list of offsets

Parse errors carry the JSON path of the offending field; syntax errors the
line and column.
"""

from __future__ import annotations

import json
from pathlib import Path

from .config import CampaignConfig
from .labels import ClassDistribution, ConfusionMatrix
from .planning import StrategyInputs, WorkloadInputs
from .postprocessing import Method
from .simulation import (
    AnnotatorProfile,
    SweepPoint,
    SyntheticDataset,
    SyntheticImage,
    generate_dataset,
    generate_graded_dataset,
)


class ScenarioError(ValueError):
    """Scenario file violates the expected schema."""


def load_scenario(path: Path | str) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path.name}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})"
        ) from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path.name}: top level must be a JSON object")
    return doc


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ScenarioError(f"{path}.{key}: missing required field")
    return doc[key]


def parse_strategy(doc: dict) -> StrategyInputs:
    section = _require(doc, "strategy", "$")
    path = "$.strategy"
    try:
        prevalence = section.get("class_prevalence")
        return StrategyInputs(
            n_images=int(_require(section, "n_images", path)),
            bias_acceptable=bool(_require(section, "bias_acceptable", path)),
            expected_speedup=float(_require(section, "expected_speedup", path)),
            class_prevalence=(
                None
                if prevalence is None
                else ClassDistribution(tuple(float(p) for p in prevalence))
            ),
            labeled_subset_fraction=float(section.get("labeled_subset_fraction", 0.2)),
            annotator_pool=int(section.get("annotator_pool", 1)),
            per_class_min_fraction=float(section.get("per_class_min_fraction", 0.01)),
            raw_pool_size=(
                None
                if section.get("raw_pool_size") is None
                else int(section["raw_pool_size"])
            ),
            speedup_threshold=float(section.get("speedup_threshold", 3.0)),
            dominance_threshold=float(section.get("dominance_threshold", 0.5)),
            self_supervision_pool_threshold=int(
                section.get("self_supervision_pool_threshold", 100_000)
            ),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def parse_workload(doc: dict) -> WorkloadInputs:
    section = _require(doc, "workload", "$")
    path = "$.workload"
    try:
        return WorkloadInputs(
            n_images=int(_require(section, "n_images", path)),
            consensus_fraction=float(_require(section, "consensus_fraction", path)),
            annotations_consensus=int(_require(section, "annotations_consensus", path)),
            annotations_full=int(_require(section, "annotations_full", path)),
            annotations_per_hour=float(_require(section, "annotations_per_hour", path)),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def parse_dataset(doc: dict) -> SyntheticDataset:
    section = _require(doc, "dataset", "$")
    path = "$.dataset"
    try:
        if "generator" in section:
            gen = section["generator"]
            kind = gen.get("kind", "dirichlet")
            k = int(_require(gen, "k", path + ".generator"))
            n_images = int(_require(gen, "n_images", path + ".generator"))
            seed = int(_require(gen, "seed", path + ".generator"))
            if kind == "dirichlet":
                return generate_dataset(
                    k,
                    n_images,
                    seed,
                    concentration=float(gen.get("concentration", 1.0)),
                    proposal_accuracy=float(gen.get("proposal_accuracy", 0.9)),
                    max_class_prob=(
                        None
                        if gen.get("max_class_prob") is None
                        else float(gen["max_class_prob"])
                    ),
                )
            if kind == "graded":
                return generate_graded_dataset(
                    k,
                    n_images,
                    seed,
                    hard_fraction=float(gen.get("hard_fraction", 0.85)),
                    ambiguity_low=float(gen.get("ambiguity_low", 0.5)),
                    ambiguity_high=float(gen.get("ambiguity_high", 0.75)),
                    proposal_accuracy=float(gen.get("proposal_accuracy", 0.9)),
                )
            raise ScenarioError(f"{path}.generator.kind: unknown kind {kind!r}")
        images = tuple(
            SyntheticImage(
                image_id=str(_require(img, "image_id", f"{path}.images[{i}]")),
                gt=ClassDistribution(
                    tuple(float(p) for p in _require(img, "gt", f"{path}.images[{i}]"))
                ),
                proposal=int(_require(img, "proposal", f"{path}.images[{i}]")),
            )
            for i, img in enumerate(_require(section, "images", path))
        )
        return SyntheticDataset(
            images=images,
            k=int(_require(section, "k", path)),
            seed=int(_require(section, "seed", path)),
        )
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def parse_profiles(doc: dict) -> list[AnnotatorProfile]:
    section = _require(doc, "annotators", "$")
    if not isinstance(section, list) or not section:
        raise ScenarioError("$.annotators: must be a nonempty list")
    profiles = []
    for i, entry in enumerate(section):
        path = f"$.annotators[{i}]"
        try:
            noise = entry.get("noise")
            profiles.append(
                AnnotatorProfile(
                    annotator_id=str(_require(entry, "annotator_id", path)),
                    delta=float(entry.get("delta", 0.0)),
                    noise=(
                        None
                        if noise is None
                        else ConfusionMatrix(
                            tuple(tuple(float(v) for v in row) for row in noise)
                        )
                    ),
                    seconds_per_annotation_no_proposal=float(
                        entry.get("seconds_per_annotation_no_proposal", 1.8)
                    ),
                    seconds_per_annotation_proposal=float(
                        entry.get("seconds_per_annotation_proposal", 1.2)
                    ),
                )
            )
        except ScenarioError:
            raise
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    return profiles


def parse_campaign(doc: dict) -> CampaignConfig:
    section = _require(doc, "campaign", "$")
    try:
        return CampaignConfig.from_dict(section)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"$.campaign: {exc}") from None


def parse_methods(doc: dict) -> list[Method]:
    section = doc.get("methods", ["RAW"])
    try:
        return [Method(str(m).upper()) for m in section]
    except ValueError as exc:
        raise ScenarioError(f"$.methods: {exc}") from None


def parse_sweep(doc: dict) -> tuple[float, list[SweepPoint]] | None:
    section = doc.get("sweep")
    if section is None:
        return None
    path = "$.sweep"
    try:
        speedup = float(_require(section, "speedup", path))
        points = [
            SweepPoint(
                use_proposals=bool(_require(p, "use_proposals", f"{path}.points[{i}]")),
                budget=float(_require(p, "budget", f"{path}.points[{i}]")),
            )
            for i, p in enumerate(_require(section, "points", path))
        ]
        if not points:
            raise ScenarioError(f"{path}.points: must not be empty")
        return speedup, points
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def parse_bias_probe(doc: dict) -> dict | None:
    section = doc.get("bias_probe")
    if section is None:
        return None
    path = "$.bias_probe"
    try:
        deltas = [float(d) for d in _require(section, "delta_values", path)]
        if any(not 0.0 <= d <= 1.0 for d in deltas):
            raise ScenarioError(f"{path}.delta_values: offsets must lie in [0, 1]")
        return {
            "delta_values": deltas,
            "annotations": int(section.get("annotations", 10_000)),
        }
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from None
