"""Persistent campaign store: JSON documents plus append-only JSONL logs.

Layout per campaign under the store root:

    <campaign_id>/config.json        campaign configuration
    <campaign_id>/manifest.jsonl     one image per line
    <campaign_id>/annotations.jsonl  append-only accepted-annotation log
    <campaign_id>/batches.jsonl      append-only issued-batch log
    <campaign_id>/events.jsonl       append-only operator events (exclusions)
    <campaign_id>/ledgers/<aid>.json materialized annotator ledgers

The three JSONL logs are the source of truth: replaying them reconstructs
the full runtime state, so a crash can never lose more than an unflushed
tail line. Ledger files are a convenience view for operators and are
rewritten on every change.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from ..config import CampaignConfig
from ..gating import AnnotatorLedger, AnnotatorStatus, IterationScore
from ..labels import AnnotationRecord


class SubsetTag(enum.Enum):
    RAW_ONLY = "RAW_ONLY"  # in the raw pool, not served for labeling
    ANNOTATE = "ANNOTATE"  # served to qualified annotators
    GOLD = "GOLD"  # precisely labeled; served during training


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    uri: str
    subset_tag: SubsetTag
    proposal: int | None = None
    gold_label: int | None = None
    eval_dist: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ValueError("image_id must be nonempty")
        if self.subset_tag is SubsetTag.GOLD and self.gold_label is None:
            raise ValueError(f"GOLD image {self.image_id!r} needs a gold_label")

    def check_classes(self, k: int) -> None:
        for name in ("proposal", "gold_label"):
            value = getattr(self, name)
            if value is not None and not 0 <= value < k:
                raise ValueError(
                    f"image {self.image_id!r}: {name} {value} out of range for K={k}"
                )

    def to_dict(self) -> dict:
        doc = {
            "image_id": self.image_id,
            "uri": self.uri,
            "proposal": self.proposal,
            "gold_label": self.gold_label,
            "subset_tag": self.subset_tag.value,
        }
        if self.eval_dist is not None:
            doc["eval_dist"] = list(self.eval_dist)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ManifestEntry":
        eval_dist = doc.get("eval_dist")
        return cls(
            image_id=str(doc["image_id"]),
            uri=str(doc.get("uri", "")),
            subset_tag=SubsetTag(doc.get("subset_tag", "ANNOTATE")),
            proposal=None if doc.get("proposal") is None else int(doc["proposal"]),
            gold_label=None if doc.get("gold_label") is None else int(doc["gold_label"]),
            eval_dist=None if eval_dist is None else tuple(float(v) for v in eval_dist),
        )


def record_to_dict(rec: AnnotationRecord) -> dict:
    return {
        "image_id": rec.image_id,
        "annotator_id": rec.annotator_id,
        "chosen_class": rec.chosen_class,
        "proposal_shown": rec.proposal_shown,
        "timestamp_ms": rec.timestamp_ms,
        "batch_id": rec.batch_id,
    }


def record_from_dict(doc: dict) -> AnnotationRecord:
    proposal = doc.get("proposal_shown")
    return AnnotationRecord(
        image_id=str(doc["image_id"]),
        annotator_id=str(doc["annotator_id"]),
        chosen_class=int(doc["chosen_class"]),
        proposal_shown=None if proposal is None else int(proposal),
        timestamp_ms=int(doc.get("timestamp_ms", 0)),
        batch_id=str(doc.get("batch_id", "")),
    )


def iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, document) pairs; raises ValueError with the
    offending line number on malformed input."""
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path.name}:{line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(doc, dict):
                raise ValueError(f"{path.name}:{line_no}: expected a JSON object")
            yield line_no, doc


def _append_jsonl(path: Path, doc: dict) -> None:
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(doc, sort_keys=True) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


class CampaignStore:
    """Filesystem store for campaign state."""

    def __init__(self, root: Path | str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def campaign_dir(self, campaign_id: str) -> Path:
        return self.root / campaign_id

    def campaign_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "config.json").exists()
        )

    def exists(self, campaign_id: str) -> bool:
        return (self.campaign_dir(campaign_id) / "config.json").exists()

    def create_campaign(
        self, config: CampaignConfig, manifest: list[ManifestEntry]
    ) -> str:
        """Persist a new campaign; validates the manifest row by row."""
        if self.exists(config.campaign_id):
            raise ValueError(f"campaign {config.campaign_id!r} already exists")
        if not manifest:
            raise ValueError("manifest must not be empty")
        needs_gold_proposals = (
            config.use_proposals
            and config.gate is not None
            and config.gate.require_both_modes
        )
        errors = []
        seen: set[str] = set()
        gold = 0
        for row_no, entry in enumerate(manifest, start=1):
            try:
                entry.check_classes(config.k)
                if entry.image_id in seen:
                    raise ValueError(f"duplicate image_id {entry.image_id!r}")
                seen.add(entry.image_id)
                if (
                    config.use_proposals
                    and entry.subset_tag is SubsetTag.ANNOTATE
                    and entry.proposal is None
                ):
                    raise ValueError(
                        f"image {entry.image_id!r} needs a proposal on a "
                        "proposal-guided campaign"
                    )
                if (
                    needs_gold_proposals
                    and entry.subset_tag is SubsetTag.GOLD
                    and entry.proposal is None
                ):
                    raise ValueError(
                        f"GOLD image {entry.image_id!r} needs a proposal so "
                        "annotators can train in both modes"
                    )
            except ValueError as exc:
                errors.append(f"manifest row {row_no}: {exc}")
            if entry.subset_tag is SubsetTag.GOLD:
                gold += 1
        if errors:
            raise ValueError("; ".join(errors))
        if config.gate is not None and gold == 0:
            raise ValueError("gating enabled but the manifest has no GOLD images")

        cdir = self.campaign_dir(config.campaign_id)
        cdir.mkdir(parents=True)
        (cdir / "ledgers").mkdir()
        (cdir / "config.json").write_text(
            json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        with (cdir / "manifest.jsonl").open("w", encoding="utf-8") as fh:
            for entry in manifest:
                fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")
        for name in ("annotations.jsonl", "batches.jsonl", "events.jsonl"):
            (cdir / name).touch()
        return config.campaign_id

    def load_config(self, campaign_id: str) -> CampaignConfig:
        path = self.campaign_dir(campaign_id) / "config.json"
        if not path.exists():
            raise KeyError(f"unknown campaign {campaign_id!r}")
        return CampaignConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def load_manifest(self, campaign_id: str) -> list[ManifestEntry]:
        path = self.campaign_dir(campaign_id) / "manifest.jsonl"
        entries = []
        for line_no, doc in iter_jsonl(path):
            try:
                entries.append(ManifestEntry.from_dict(doc))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"manifest.jsonl:{line_no}: {exc}") from None
        return entries

    def load_annotations(self, campaign_id: str) -> list[AnnotationRecord]:
        path = self.campaign_dir(campaign_id) / "annotations.jsonl"
        records = []
        for line_no, doc in iter_jsonl(path):
            try:
                records.append(record_from_dict(doc))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"annotations.jsonl:{line_no}: {exc}") from None
        return records

    def load_batches(self, campaign_id: str) -> list[dict]:
        return [doc for _, doc in iter_jsonl(self.campaign_dir(campaign_id) / "batches.jsonl")]

    def load_events(self, campaign_id: str) -> list[dict]:
        return [doc for _, doc in iter_jsonl(self.campaign_dir(campaign_id) / "events.jsonl")]

    def append_annotation(self, campaign_id: str, rec: AnnotationRecord) -> None:
        _append_jsonl(self.campaign_dir(campaign_id) / "annotations.jsonl", record_to_dict(rec))

    def append_batch(self, campaign_id: str, batch_doc: dict) -> None:
        _append_jsonl(self.campaign_dir(campaign_id) / "batches.jsonl", batch_doc)

    def append_event(self, campaign_id: str, event: dict) -> None:
        _append_jsonl(self.campaign_dir(campaign_id) / "events.jsonl", event)

    def write_ledger_view(self, campaign_id: str, ledger: AnnotatorLedger) -> None:
        path = self.campaign_dir(campaign_id) / "ledgers" / f"{ledger.annotator_id}.json"
        doc = {
            "annotator_id": ledger.annotator_id,
            "status": ledger.status.value,
            "iterations": [
                {
                    "iteration_id": it.iteration_id,
                    "with_proposals": it.with_proposals,
                    "macro_f1": it.macro_f1,
                    "macro_accuracy": it.macro_accuracy,
                    "minutes_spent": it.minutes_spent,
                }
                for it in ledger.iterations
            ],
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def ledger_from_view(doc: dict) -> AnnotatorLedger:
    return AnnotatorLedger(
        annotator_id=str(doc["annotator_id"]),
        status=AnnotatorStatus(doc["status"]),
        iterations=tuple(
            IterationScore(
                iteration_id=str(it["iteration_id"]),
                with_proposals=bool(it["with_proposals"]),
                macro_f1=float(it["macro_f1"]),
                macro_accuracy=float(it["macro_accuracy"]),
                minutes_spent=float(it.get("minutes_spent", 0.0)),
            )
            for it in doc.get("iterations", ())
        ),
    )
