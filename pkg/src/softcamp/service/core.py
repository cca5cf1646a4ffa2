"""Campaign orchestration: batching, submission, progress, export.

All state mutations go through the append-only logs in the store and are
mirrored in memory, so reloading a campaign replays the logs and arrives at
the exact same state (crash safety). Every time-dependent decision takes
``now_ms`` as an argument; the HTTP layer defaults it to the wall clock and
tests inject a simulated clock.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .. import export as export_mod
from ..config import CampaignConfig
from ..gating import (
    AnnotatorLedger,
    AnnotatorStatus,
    GateConfig,
    IterationScore,
    exclude,
    quality_alert,
    score_iteration,
    update_status,
)
from ..labels import AnnotationRecord
from ..planning import WorkloadInputs, estimate_workload
from ..postprocessing import Method
from .store import CampaignStore, ManifestEntry, SubsetTag

EXPORT_METHODS = (Method.RAW, Method.CLEVERLABEL, Method.BLEND_ONLY)


class CampaignNotFound(KeyError):
    pass


class AnnotatorExcludedError(PermissionError):
    pass


@dataclass(frozen=True)
class BatchItem:
    image_id: str
    uri: str
    proposal: int | None


@dataclass(frozen=True)
class TaskBatch:
    batch_id: str
    annotator_id: str
    items: tuple[BatchItem, ...]
    issued_at_ms: int
    training: bool

    def to_dict(self) -> dict:
        return {
            "batch_id": self.batch_id,
            "annotator_id": self.annotator_id,
            "issued_at_ms": self.issued_at_ms,
            "training": self.training,
            "items": [
                {"image_id": it.image_id, "uri": it.uri, "proposal": it.proposal}
                for it in self.items
            ],
        }


@dataclass(frozen=True)
class SubmitResult:
    accepted: int
    rejected: list[dict]


class _Runtime:
    """In-memory state of one campaign, rebuilt from the logs on load."""

    def __init__(self, config: CampaignConfig, manifest: list[ManifestEntry]):
        self.config = config
        # Qualification in both proposal modes only makes sense when the
        # campaign shows proposals at all.
        self.gate: GateConfig | None = config.gate
        if self.gate is not None and not config.use_proposals:
            self.gate = GateConfig(
                mu=self.gate.mu,
                required_passing_iterations=self.gate.required_passing_iterations,
                metrics=self.gate.metrics,
                require_both_modes=False,
            )
        self.manifest = {e.image_id: e for e in manifest}
        self.annotate_ids = sorted(
            e.image_id for e in manifest if e.subset_tag is SubsetTag.ANNOTATE
        )
        self.gold_ids = sorted(
            e.image_id for e in manifest if e.subset_tag is SubsetTag.GOLD
        )
        self.gold_labels = {
            e.image_id: e.gold_label
            for e in manifest
            if e.subset_tag is SubsetTag.GOLD
        }
        self.records_by_image: dict[str, list[AnnotationRecord]] = {}
        self.submitted_keys: set[tuple[str, str, str]] = set()
        self.last_ts: dict[tuple[str, str], int] = {}
        self.batches: dict[str, dict] = {}
        self.batch_seq = 0
        self.training_batches_issued: Counter = Counter()
        self.batch_pending: dict[str, set[str]] = {}  # batch_id -> images not yet submitted
        self.scored_batches: set[str] = set()
        self.ledgers: dict[str, AnnotatorLedger] = {}
        self.excluded: set[str] = set()

    # -- state application (shared by live mutation and replay) ------------

    def apply_batch(self, doc: dict) -> None:
        self.batches[doc["batch_id"]] = doc
        self.batch_seq += 1
        if doc["training"]:
            self.training_batches_issued[doc["annotator_id"]] += 1
        self.batch_pending[doc["batch_id"]] = {
            item["image_id"] for item in doc["items"]
        }

    def apply_record(self, rec: AnnotationRecord) -> IterationScore | None:
        """Apply an accepted record; returns a new iteration score when this
        record completes a training batch."""
        self.records_by_image.setdefault(rec.image_id, []).append(rec)
        self.submitted_keys.add((rec.batch_id, rec.image_id, rec.annotator_id))
        key = (rec.annotator_id, rec.image_id)
        self.last_ts[key] = max(self.last_ts.get(key, 0), rec.timestamp_ms)
        pending = self.batch_pending.get(rec.batch_id)
        if pending is not None:
            pending.discard(rec.image_id)
        batch = self.batches.get(rec.batch_id)
        if (
            batch is not None
            and batch["training"]
            and rec.batch_id not in self.scored_batches
            and not self.batch_pending.get(rec.batch_id)
        ):
            self.scored_batches.add(rec.batch_id)
            return self._score_training_batch(batch)
        return None

    def _score_training_batch(self, batch: dict) -> IterationScore | None:
        if self.gate is None:
            return None
        annotator_id = batch["annotator_id"]
        batch_records = [
            rec
            for image in (item["image_id"] for item in batch["items"])
            for rec in self.records_by_image.get(image, ())
            if rec.batch_id == batch["batch_id"] and rec.annotator_id == annotator_id
        ]
        if not batch_records:
            return None
        scores = score_iteration(batch_records, self.gold_labels, self.config.k)
        stamps = [rec.timestamp_ms for rec in batch_records]
        iteration = IterationScore(
            iteration_id=batch["batch_id"],
            with_proposals=any(item["proposal"] is not None for item in batch["items"]),
            macro_f1=scores["macro_f1"],
            macro_accuracy=scores["macro_accuracy"],
            minutes_spent=(max(stamps) - min(stamps)) / 60_000.0,
        )
        ledger = self.ledgers.get(annotator_id) or AnnotatorLedger(annotator_id)
        self.ledgers[annotator_id] = update_status(ledger, iteration, self.gate)
        return iteration

    def apply_event(self, event: dict) -> None:
        if event.get("type") == "exclude":
            annotator_id = event["annotator_id"]
            self.excluded.add(annotator_id)
            ledger = self.ledgers.get(annotator_id) or AnnotatorLedger(annotator_id)
            self.ledgers[annotator_id] = exclude(ledger)

    # -- queries ------------------------------------------------------------

    def live_records(self, image_id: str) -> list[AnnotationRecord]:
        return [
            rec
            for rec in self.records_by_image.get(image_id, ())
            if rec.annotator_id not in self.excluded
        ]

    def consensus_reached(self, records: list[AnnotationRecord]) -> bool:
        """Early stop: agreement among the first a_cons annotations."""
        if len(records) < self.config.a_cons:
            return False
        head = records[: self.config.a_cons]
        top = Counter(rec.chosen_class for rec in head).most_common(1)[0][1]
        return top >= self.config.agreement_threshold * self.config.a_cons - 1e-9

    def needs_work(self, image_id: str) -> bool:
        records = self.live_records(image_id)
        if len(records) < self.config.a_cons:
            return True
        if self.consensus_reached(records):
            return False
        return len(records) < self.config.a_full

    def status_of(self, annotator_id: str) -> AnnotatorStatus:
        if annotator_id in self.excluded:
            return AnnotatorStatus.EXCLUDED
        if self.gate is None:
            return AnnotatorStatus.QUALIFIED
        ledger = self.ledgers.get(annotator_id)
        return ledger.status if ledger else AnnotatorStatus.TRAINING

    def cooled_down(self, annotator_id: str, image_id: str, now_ms: int) -> bool:
        last = self.last_ts.get((annotator_id, image_id))
        return last is None or now_ms - last >= self.config.cooldown_ms

    def held_by_open_batch(self, annotator_id: str, image_id: str, now_ms: int) -> bool:
        """An image issued to this annotator and not yet submitted stays
        blocked for them until the batch ages past the cooldown window."""
        for batch_id, pending in self.batch_pending.items():
            if image_id not in pending:
                continue
            batch = self.batches[batch_id]
            if batch["annotator_id"] != annotator_id:
                continue
            if now_ms - batch["issued_at_ms"] < max(self.config.cooldown_ms, 1):
                return True
        return False


class CampaignService:
    """Store-backed service; one instance can host many campaigns.

    Mutations on a campaign are serialized through a per-campaign lock;
    separate campaigns proceed in parallel.
    """

    def __init__(self, store_dir: Path | str):
        self.store = CampaignStore(store_dir)
        self._runtimes: dict[str, _Runtime] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._registry_lock = threading.Lock()

    # -- plumbing ------------------------------------------------------------

    def _lock(self, campaign_id: str) -> threading.RLock:
        with self._registry_lock:
            if campaign_id not in self._locks:
                self._locks[campaign_id] = threading.RLock()
            return self._locks[campaign_id]

    def _runtime(self, campaign_id: str) -> _Runtime:
        if campaign_id in self._runtimes:
            return self._runtimes[campaign_id]
        if not self.store.exists(campaign_id):
            raise CampaignNotFound(campaign_id)
        config = self.store.load_config(campaign_id)
        manifest = self.store.load_manifest(campaign_id)
        runtime = _Runtime(config, manifest)
        for doc in self.store.load_batches(campaign_id):
            runtime.apply_batch(doc)
        for rec in self.store.load_annotations(campaign_id):
            runtime.apply_record(rec)
        for event in self.store.load_events(campaign_id):
            runtime.apply_event(event)
        for ledger in runtime.ledgers.values():
            self.store.write_ledger_view(campaign_id, ledger)
        self._runtimes[campaign_id] = runtime
        return runtime

    # -- operations ------------------------------------------------------------

    def create_campaign(
        self, config: CampaignConfig, manifest: list[ManifestEntry]
    ) -> str:
        with self._lock(config.campaign_id):
            return self.store.create_campaign(config, manifest)

    def campaign_ids(self) -> list[str]:
        return self.store.campaign_ids()

    def next_batch(
        self,
        campaign_id: str,
        annotator_id: str,
        now_ms: int,
        size: int | None = None,
    ) -> TaskBatch | None:
        """Issue the next batch, or None when nothing is eligible."""
        with self._lock(campaign_id):
            rt = self._runtime(campaign_id)
            status = rt.status_of(annotator_id)
            if status is AnnotatorStatus.EXCLUDED:
                raise AnnotatorExcludedError(f"annotator {annotator_id!r} is excluded")
            size = size if size and size > 0 else rt.config.batch_size

            if status is AnnotatorStatus.TRAINING:
                image_ids, training = self._training_selection(rt, annotator_id, now_ms)
            else:
                image_ids, training = self._work_selection(rt, annotator_id, now_ms)
            image_ids = image_ids[:size]
            if not image_ids:
                return None

            if training:
                # Alternate proposal display across an annotator's training
                # batches so both modes get exercised.
                show = (
                    rt.config.use_proposals
                    and rt.training_batches_issued[annotator_id] % 2 == 1
                )
            else:
                show = rt.config.use_proposals
            items = tuple(
                BatchItem(
                    image_id=image_id,
                    uri=rt.manifest[image_id].uri,
                    proposal=rt.manifest[image_id].proposal if show else None,
                )
                for image_id in image_ids
            )
            batch = TaskBatch(
                batch_id=f"{campaign_id}-b{rt.batch_seq:06d}",
                annotator_id=annotator_id,
                items=items,
                issued_at_ms=now_ms,
                training=training,
            )
            self.store.append_batch(campaign_id, batch.to_dict())
            rt.apply_batch(batch.to_dict())
            return batch

    def _training_selection(
        self, rt: _Runtime, annotator_id: str, now_ms: int
    ) -> tuple[list[str], bool]:
        eligible = [
            image_id
            for image_id in rt.gold_ids
            if rt.cooled_down(annotator_id, image_id, now_ms)
            and not rt.held_by_open_batch(annotator_id, image_id, now_ms)
        ]
        return eligible, True

    def _work_selection(
        self, rt: _Runtime, annotator_id: str, now_ms: int
    ) -> tuple[list[str], bool]:
        eligible = [
            image_id
            for image_id in rt.annotate_ids
            if rt.needs_work(image_id)
            and rt.cooled_down(annotator_id, image_id, now_ms)
            and not rt.held_by_open_batch(annotator_id, image_id, now_ms)
        ]
        if rt.config.use_proposals and eligible:
            # Greedy grouping: serve the most-populous pending proposal
            # class first so a batch is mostly one class; the tail may mix.
            groups: dict[int | None, list[str]] = {}
            for image_id in eligible:
                groups.setdefault(rt.manifest[image_id].proposal, []).append(image_id)
            order = sorted(
                groups,
                key=lambda cls: (-len(groups[cls]), cls if cls is not None else -1),
            )
            eligible = [image_id for cls in order for image_id in groups[cls]]
        return eligible, False

    def submit_annotations(
        self, campaign_id: str, records: list[AnnotationRecord]
    ) -> SubmitResult:
        """Validate and append records; duplicates and rule violations are
        rejected row by row, never overwriting anything."""
        with self._lock(campaign_id):
            rt = self._runtime(campaign_id)
            accepted = 0
            rejected: list[dict] = []
            for index, rec in enumerate(records):
                reason = self._validate_record(rt, rec)
                if reason is not None:
                    rejected.append(
                        {"index": index, "image_id": rec.image_id, "reason": reason}
                    )
                    continue
                self.store.append_annotation(campaign_id, rec)
                iteration = rt.apply_record(rec)
                if iteration is not None:
                    self.store.write_ledger_view(
                        campaign_id, rt.ledgers[rec.annotator_id]
                    )
                accepted += 1
            return SubmitResult(accepted=accepted, rejected=rejected)

    def _validate_record(self, rt: _Runtime, rec: AnnotationRecord) -> str | None:
        if rec.annotator_id in rt.excluded:
            return "annotator excluded"
        batch = rt.batches.get(rec.batch_id)
        if batch is None:
            return "unknown or stale batch"
        if batch["annotator_id"] != rec.annotator_id:
            return "batch belongs to a different annotator"
        item = next(
            (it for it in batch["items"] if it["image_id"] == rec.image_id), None
        )
        if rec.image_id not in rt.manifest:
            return "unknown image"
        if item is None:
            return "image not in batch"
        if not 0 <= rec.chosen_class < rt.config.k:
            return f"chosen_class {rec.chosen_class} out of range for K={rt.config.k}"
        if rec.proposal_shown != item["proposal"]:
            return "proposal_shown does not match the issued batch"
        if (rec.batch_id, rec.image_id, rec.annotator_id) in rt.submitted_keys:
            return "duplicate"
        last = rt.last_ts.get((rec.annotator_id, rec.image_id))
        if last is not None and rec.timestamp_ms - last < rt.config.cooldown_ms:
            return "cooldown violation"
        entry = rt.manifest[rec.image_id]
        if entry.subset_tag is SubsetTag.ANNOTATE:
            if len(rt.live_records(rec.image_id)) >= rt.config.a_full:
                return "image already has the full annotation count"
        return None

    def progress(self, campaign_id: str) -> dict:
        with self._lock(campaign_id):
            rt = self._runtime(campaign_id)
            per_image = {
                image_id: len(rt.live_records(image_id))
                for image_id in rt.annotate_ids
            }
            with_min = [
                image_id
                for image_id, count in per_image.items()
                if count >= rt.config.a_cons
            ]
            near = 0
            for image_id in with_min:
                records = rt.live_records(image_id)
                top = Counter(r.chosen_class for r in records).most_common(1)[0][1]
                if top / len(records) >= 0.95 - 1e-9:
                    near += 1
            p_hat_c = near / len(with_min) if with_min else None

            annotators = {}
            team_rate = 0.0
            for annotator_id in sorted(
                {r.annotator_id for recs in rt.records_by_image.values() for r in recs}
            ):
                stamps = [
                    r.timestamp_ms
                    for recs in rt.records_by_image.values()
                    for r in recs
                    if r.annotator_id == annotator_id
                ]
                rate = None
                if len(stamps) >= 2 and max(stamps) > min(stamps):
                    span_hours = (max(stamps) - min(stamps)) / 3_600_000.0
                    rate = (len(stamps) - 1) / span_hours
                    if annotator_id not in rt.excluded:
                        team_rate += rate
                annotators[annotator_id] = {
                    "annotations": len(stamps),
                    "annotations_per_hour": rate,
                    "status": rt.status_of(annotator_id).value,
                }

            incomplete = [i for i in rt.annotate_ids if rt.needs_work(i)]
            remaining_hours = None
            if incomplete and team_rate > 0:
                remaining_hours = estimate_workload(
                    WorkloadInputs(
                        n_images=len(incomplete),
                        consensus_fraction=p_hat_c if p_hat_c is not None else 0.5,
                        annotations_consensus=rt.config.a_cons,
                        annotations_full=rt.config.a_full,
                        annotations_per_hour=team_rate,
                    )
                ).hours

            complete = [i for i in rt.annotate_ids if not rt.needs_work(i)]
            escalated = [
                image_id
                for image_id, count in per_image.items()
                if count >= rt.config.a_cons
                and not rt.consensus_reached(rt.live_records(image_id))
            ]
            return {
                "campaign_id": campaign_id,
                "per_image_counts": per_image,
                "total_annotations": sum(per_image.values()),
                "images_complete": len(complete),
                "images_escalated": len(escalated),
                "p_hat_c": p_hat_c,
                "annotators": annotators,
                "estimated_remaining_hours": remaining_hours,
            }

    def export(self, campaign_id: str, method: Method) -> list[export_mod.ExportRow]:
        with self._lock(campaign_id):
            rt = self._runtime(campaign_id)
            if method not in EXPORT_METHODS:
                raise ValueError(f"method {method.value} is not exportable")
            if method.needs_proposals and not rt.config.use_proposals:
                raise ValueError(
                    f"{method.value} requires a campaign annotated with proposals"
                )
            records = [
                rec
                for image_id in rt.annotate_ids
                for rec in rt.records_by_image.get(image_id, ())
            ]
            return export_mod.build_rows(
                records,
                rt.config.postprocess,
                method,
                image_ids=set(rt.annotate_ids),
                excluded_annotators=frozenset(rt.excluded),
            )

    def export_text(self, campaign_id: str, method: Method, fmt: str) -> str:
        rows = self.export(campaign_id, method)
        if fmt == "csv":
            rt = self._runtime(campaign_id)
            return export_mod.rows_to_csv(rows, rt.config.k)
        if fmt == "jsonl":
            return export_mod.rows_to_jsonl(rows)
        raise ValueError(f"unknown export format {fmt!r}")

    def annotator_info(self, campaign_id: str, annotator_id: str) -> dict:
        with self._lock(campaign_id):
            rt = self._runtime(campaign_id)
            ledger = rt.ledgers.get(annotator_id) or AnnotatorLedger(annotator_id)
            if annotator_id in rt.excluded:
                ledger = exclude(ledger)
            alert = rt.gate is not None and quality_alert(ledger, rt.gate)
            return {
                "annotator_id": annotator_id,
                "status": rt.status_of(annotator_id).value,
                "quality_alert": alert,
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

    def exclude_annotator(self, campaign_id: str, annotator_id: str) -> dict:
        """Operator action: drop an annotator and all their influence."""
        with self._lock(campaign_id):
            rt = self._runtime(campaign_id)
            event = {"type": "exclude", "annotator_id": annotator_id}
            self.store.append_event(campaign_id, event)
            rt.apply_event(event)
            self.store.write_ledger_view(campaign_id, rt.ledgers[annotator_id])
            return {"annotator_id": annotator_id, "status": AnnotatorStatus.EXCLUDED.value}
