"""Tests for the campaign service: store, batching, cooldown, escalation,
gating flow, export, and crash-safe replay."""

import json

import pytest

from softcamp.config import CampaignConfig
from softcamp.gating import GateConfig
from softcamp.labels import AnnotationRecord, ConfusionMatrix
from softcamp.postprocessing import BiasModel, Method, PostprocessConfig
from softcamp.service.core import (
    AnnotatorExcludedError,
    CampaignNotFound,
    CampaignService,
)
from softcamp.service.store import CampaignStore, ManifestEntry, SubsetTag

HOUR_MS = 3_600_000


def make_config(
    campaign_id="camp",
    k=3,
    a_cons=2,
    a_full=4,
    use_proposals=True,
    cooldown_hours=12.0,
    batch_size=24,
    gate=None,
    agreement=1.0,
    delta=0.0,
):
    return CampaignConfig(
        campaign_id=campaign_id,
        k=k,
        class_names=tuple(f"c{i}" for i in range(k)),
        a_cons=a_cons,
        a_full=a_full,
        use_proposals=use_proposals,
        cooldown_hours=cooldown_hours,
        batch_size=batch_size,
        gate=gate,
        agreement_threshold=agreement,
        postprocess=PostprocessConfig(
            bias=BiasModel(delta), confusion=ConfusionMatrix.identity(k)
        ),
    )


def annotate_entries(n, k=3):
    return [
        ManifestEntry(
            image_id=f"img-{i:03d}",
            uri=f"file:///{i}.png",
            subset_tag=SubsetTag.ANNOTATE,
            proposal=i % k,
        )
        for i in range(n)
    ]


def gold_entries(n, k=3, prefix="gold"):
    return [
        ManifestEntry(
            image_id=f"{prefix}-{i:03d}",
            uri=f"file:///{prefix}{i}.png",
            subset_tag=SubsetTag.GOLD,
            proposal=i % k,
            gold_label=i % k,
        )
        for i in range(n)
    ]


def submit_batch(service, campaign_id, batch, chooser, base_ms):
    """Submit a full batch; chooser maps an item to a class."""
    records = [
        {
            "image_id": item.image_id,
            "annotator_id": batch.annotator_id,
            "chosen_class": chooser(item),
            "proposal_shown": item.proposal,
            "timestamp_ms": base_ms + i,
            "batch_id": batch.batch_id,
        }
        for i, item in enumerate(batch.items)
    ]
    from softcamp.service.store import record_from_dict

    return service.submit_annotations(
        campaign_id, [record_from_dict(r) for r in records]
    )


class TestStore:
    def test_create_and_reload(self, tmp_path):
        store = CampaignStore(tmp_path)
        config = make_config()
        store.create_campaign(config, annotate_entries(5))
        assert store.campaign_ids() == ["camp"]
        assert store.load_config("camp").k == 3
        assert len(store.load_manifest("camp")) == 5

    def test_duplicate_campaign_rejected(self, tmp_path):
        store = CampaignStore(tmp_path)
        store.create_campaign(make_config(), annotate_entries(3))
        with pytest.raises(ValueError, match="already exists"):
            store.create_campaign(make_config(), annotate_entries(3))

    def test_invalid_rows_reported_with_numbers(self, tmp_path):
        store = CampaignStore(tmp_path)
        rows = annotate_entries(3)
        rows[1] = ManifestEntry(
            image_id="bad", uri="", subset_tag=SubsetTag.ANNOTATE, proposal=9
        )
        with pytest.raises(ValueError, match="manifest row 2"):
            store.create_campaign(make_config(), rows)

    def test_gold_required_when_gating(self, tmp_path):
        store = CampaignStore(tmp_path)
        config = make_config(gate=GateConfig())
        with pytest.raises(ValueError, match="GOLD"):
            store.create_campaign(config, annotate_entries(3))

    def test_proposals_required_on_proposal_campaign(self, tmp_path):
        store = CampaignStore(tmp_path)
        rows = annotate_entries(2)
        rows.append(
            ManifestEntry(image_id="np", uri="", subset_tag=SubsetTag.ANNOTATE)
        )
        with pytest.raises(ValueError, match="needs a proposal"):
            store.create_campaign(make_config(), rows)

    def test_empty_manifest_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            CampaignStore(tmp_path).create_campaign(make_config(), [])

    def test_gold_needs_label(self):
        with pytest.raises(ValueError, match="gold_label"):
            ManifestEntry(image_id="g", uri="", subset_tag=SubsetTag.GOLD)

    def test_config_rejects_a_cons_above_full(self):
        with pytest.raises(ValueError):
            make_config(a_cons=5, a_full=4)

    def test_malformed_jsonl_line_numbered(self, tmp_path):
        store = CampaignStore(tmp_path)
        store.create_campaign(make_config(), annotate_entries(2))
        log = tmp_path / "camp" / "annotations.jsonl"
        valid = (
            '{"image_id": "img-000", "annotator_id": "a", "chosen_class": 0,'
            ' "proposal_shown": 0, "timestamp_ms": 1, "batch_id": "b"}'
        )
        log.write_text(valid + "\nnot json\n", encoding="utf-8")
        with pytest.raises(ValueError, match="annotations.jsonl:2"):
            store.load_annotations("camp")


class TestBatching:
    def test_batches_group_by_proposal(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=6), annotate_entries(9))
        batch = service.next_batch("camp", "ann", now_ms=0)
        proposals = [item.proposal for item in batch.items]
        # most-populous class first, grouped
        assert proposals == sorted(proposals, key=lambda c: (proposals.count(c) * -1, c))
        assert len(batch.items) == 6

    def test_no_proposals_shown_on_plain_campaign(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(use_proposals=False), annotate_entries(4)
        )
        batch = service.next_batch("camp", "ann", now_ms=0)
        assert all(item.proposal is None for item in batch.items)

    def test_size_parameter(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(), annotate_entries(8))
        batch = service.next_batch("camp", "ann", now_ms=0, size=3)
        assert len(batch.items) == 3

    def test_empty_when_all_done(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=1, a_full=1, batch_size=10), annotate_entries(2)
        )
        batch = service.next_batch("camp", "ann", now_ms=0)
        submit_batch(service, "camp", batch, lambda it: it.proposal, base_ms=1000)
        assert service.next_batch("camp", "other", now_ms=HOUR_MS) is None

    def test_unknown_campaign(self, tmp_path):
        with pytest.raises(CampaignNotFound):
            CampaignService(tmp_path).next_batch("nope", "ann", now_ms=0)

    def test_cooldown_excludes_recent_images(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=4, cooldown_hours=12), annotate_entries(2)
        )
        batch = service.next_batch("camp", "ann", now_ms=0)
        submit_batch(service, "camp", batch, lambda it: it.proposal, base_ms=1000)
        # one hour later: both images still inside the cooldown window
        assert service.next_batch("camp", "ann", now_ms=HOUR_MS) is None
        # another annotator is unaffected
        other = service.next_batch("camp", "other", now_ms=HOUR_MS)
        assert other is not None
        # after the cooldown the first annotator can see them again
        later = service.next_batch("camp", "ann", now_ms=13 * HOUR_MS)
        assert later is not None

    def test_open_batch_holds_images(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(), annotate_entries(2))
        first = service.next_batch("camp", "ann", now_ms=0)
        assert first is not None
        # unsubmitted batch blocks reissue to the same annotator
        assert service.next_batch("camp", "ann", now_ms=1000) is None

    def test_consensus_image_never_served_again(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=4, batch_size=10), annotate_entries(1)
        )
        for i, annotator in enumerate(("a1", "a2")):
            batch = service.next_batch("camp", annotator, now_ms=i * 1000)
            submit_batch(service, "camp", batch, lambda it: 0, base_ms=10_000 + i)
        assert service.next_batch("camp", "a3", now_ms=HOUR_MS) is None

    def test_disagreement_escalates_to_full(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=3, batch_size=10), annotate_entries(1)
        )
        for i, (annotator, cls) in enumerate((("a1", 0), ("a2", 1))):
            batch = service.next_batch("camp", annotator, now_ms=i * 1000)
            submit_batch(service, "camp", batch, lambda it, c=cls: c, base_ms=10_000 + i)
        # escalated: a third annotator is still served
        batch = service.next_batch("camp", "a3", now_ms=HOUR_MS)
        assert batch is not None
        submit_batch(service, "camp", batch, lambda it: 0, base_ms=20_000)
        # a_full reached: done
        assert service.next_batch("camp", "a4", now_ms=2 * HOUR_MS) is None


class TestSubmission:
    def test_accepts_valid_batch(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=4), annotate_entries(4))
        batch = service.next_batch("camp", "ann", now_ms=0)
        result = submit_batch(service, "camp", batch, lambda it: it.proposal, 1000)
        assert result.accepted == 4
        assert result.rejected == []

    def test_duplicate_rejected(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=2), annotate_entries(2))
        batch = service.next_batch("camp", "ann", now_ms=0)
        submit_batch(service, "camp", batch, lambda it: it.proposal, 1000)
        result = submit_batch(service, "camp", batch, lambda it: it.proposal, 2000)
        assert result.accepted == 0
        assert all(r["reason"] == "duplicate" for r in result.rejected)

    def test_class_out_of_range_rejected(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(k=3, batch_size=1), annotate_entries(1))
        batch = service.next_batch("camp", "ann", now_ms=0)
        record = AnnotationRecord(
            image_id=batch.items[0].image_id,
            annotator_id="ann",
            chosen_class=7,
            proposal_shown=batch.items[0].proposal,
            timestamp_ms=1,
            batch_id=batch.batch_id,
        )
        result = service.submit_annotations("camp", [record])
        assert result.accepted == 0
        assert "out of range" in result.rejected[0]["reason"]

    def test_unknown_batch_rejected(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(), annotate_entries(1))
        record = AnnotationRecord(
            image_id="img-000", annotator_id="ann", chosen_class=0,
            proposal_shown=0, timestamp_ms=1, batch_id="bogus",
        )
        result = service.submit_annotations("camp", [record])
        assert result.rejected[0]["reason"] == "unknown or stale batch"

    def test_image_not_in_batch_rejected(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=1), annotate_entries(2))
        batch = service.next_batch("camp", "ann", now_ms=0)
        other_image = next(
            e.image_id for e in annotate_entries(2) if e.image_id != batch.items[0].image_id
        )
        record = AnnotationRecord(
            image_id=other_image, annotator_id="ann", chosen_class=0,
            proposal_shown=0, timestamp_ms=1, batch_id=batch.batch_id,
        )
        result = service.submit_annotations("camp", [record])
        assert result.rejected[0]["reason"] == "image not in batch"

    def test_proposal_echo_must_match(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=1), annotate_entries(1))
        batch = service.next_batch("camp", "ann", now_ms=0)
        record = AnnotationRecord(
            image_id=batch.items[0].image_id, annotator_id="ann", chosen_class=0,
            proposal_shown=(batch.items[0].proposal + 1) % 3,
            timestamp_ms=1, batch_id=batch.batch_id,
        )
        result = service.submit_annotations("camp", [record])
        assert "proposal_shown" in result.rejected[0]["reason"]

    def test_cooldown_violation_rejected(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=3, a_full=6, cooldown_hours=12, batch_size=1),
            annotate_entries(1),
        )
        first = service.next_batch("camp", "ann", now_ms=0)
        submit_batch(service, "camp", first, lambda it: 0, base_ms=1000)
        second = service.next_batch("camp", "ann", now_ms=13 * HOUR_MS)
        record = AnnotationRecord(
            image_id=second.items[0].image_id, annotator_id="ann", chosen_class=0,
            proposal_shown=second.items[0].proposal,
            timestamp_ms=2000,  # barely later than the first annotation
            batch_id=second.batch_id,
        )
        result = service.submit_annotations("camp", [record])
        assert result.rejected[0]["reason"] == "cooldown violation"


class TestGatingFlow:
    def gated_service(self, tmp_path, mu=0.6):
        service = CampaignService(tmp_path)
        config = make_config(
            gate=GateConfig(mu=mu), batch_size=6, a_cons=2, a_full=4
        )
        manifest = annotate_entries(6) + gold_entries(6)
        service.create_campaign(config, manifest)
        return service

    def test_training_annotator_gets_gold_only(self, tmp_path):
        service = self.gated_service(tmp_path)
        batch = service.next_batch("camp", "ann", now_ms=0)
        assert batch.training
        assert all(item.image_id.startswith("gold") for item in batch.items)
        # first training batch hides proposals; second shows them
        assert all(item.proposal is None for item in batch.items)

    def test_qualification_after_two_good_iterations(self, tmp_path):
        service = self.gated_service(tmp_path)
        now = 0
        for round_no in range(2):
            batch = service.next_batch("camp", "ann", now_ms=now)
            assert batch.training
            result = submit_batch(
                service, "camp", batch,
                lambda it: int(it.image_id.rsplit("-", 1)[1]) % 3,  # = gold label
                base_ms=now + 1000,
            )
            assert result.accepted == len(batch.items)
            now += 13 * HOUR_MS
        info = service.annotator_info("camp", "ann")
        assert info["status"] == "QUALIFIED"
        assert info["iterations"][0]["with_proposals"] is False
        assert info["iterations"][1]["with_proposals"] is True
        # now the annotator is served real work
        batch = service.next_batch("camp", "ann", now_ms=now)
        assert not batch.training
        assert all(item.image_id.startswith("img") for item in batch.items)

    def test_low_scores_stay_training(self, tmp_path):
        service = self.gated_service(tmp_path)
        now = 0
        for round_no in range(3):
            batch = service.next_batch("camp", "ann", now_ms=now)
            assert batch.training
            # always answer class 0: macro scores well below 0.6
            submit_batch(service, "camp", batch, lambda it: 0, base_ms=now + 1000)
            now += 13 * HOUR_MS
        info = service.annotator_info("camp", "ann")
        assert info["status"] == "TRAINING"
        assert all(it["macro_f1"] < 0.6 for it in info["iterations"])

    def test_excluded_annotator_gets_error(self, tmp_path):
        service = self.gated_service(tmp_path)
        service.exclude_annotator("camp", "ann")
        with pytest.raises(AnnotatorExcludedError):
            service.next_batch("camp", "ann", now_ms=0)

    def test_exclusion_drops_records_from_export(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=4, batch_size=6), annotate_entries(3)
        )
        for i, annotator in enumerate(("keep", "drop")):
            batch = service.next_batch("camp", annotator, now_ms=i)
            submit_batch(
                service, "camp", batch,
                lambda it: 0 if annotator == "keep" else 1,
                base_ms=1000 + i,
            )
        before = service.export("camp", Method.RAW)
        assert all(row.n_annotations == 2 for row in before)
        service.exclude_annotator("camp", "drop")
        after = service.export("camp", Method.RAW)
        assert all(row.n_annotations == 1 for row in after)
        assert all(row.probs[0] == 1.0 for row in after)


class TestProgressAndExport:
    def test_fresh_campaign(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(), annotate_entries(3))
        progress = service.progress("camp")
        assert progress["total_annotations"] == 0
        assert progress["p_hat_c"] is None
        assert all(v == 0 for v in progress["per_image_counts"].values())

    def test_unanimous_p_hat_one(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=4, batch_size=4), annotate_entries(2)
        )
        for i, annotator in enumerate(("a1", "a2")):
            batch = service.next_batch("camp", annotator, now_ms=i)
            submit_batch(service, "camp", batch, lambda it: 0, base_ms=1000 + i)
        assert service.progress("camp")["p_hat_c"] == 1.0

    def test_rate_matches_hand_computation(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=1, a_full=1, batch_size=10, cooldown_hours=0),
            annotate_entries(10),
        )
        batch = service.next_batch("camp", "ann", now_ms=0)
        # 10 annotations spaced exactly 36 s apart: 9 intervals in 324 s
        records = [
            AnnotationRecord(
                image_id=item.image_id, annotator_id="ann",
                chosen_class=item.proposal, proposal_shown=item.proposal,
                timestamp_ms=36_000 * i, batch_id=batch.batch_id,
            )
            for i, item in enumerate(batch.items)
        ]
        service.submit_annotations("camp", records)
        rate = service.progress("camp")["annotators"]["ann"]["annotations_per_hour"]
        assert rate == pytest.approx(100.0, rel=0.01)

    def test_remaining_hours_estimated_from_team_rate(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=4, batch_size=10, cooldown_hours=0),
            annotate_entries(10),
        )
        batch = service.next_batch("camp", "ann", now_ms=0)
        records = [
            AnnotationRecord(
                image_id=item.image_id, annotator_id="ann",
                chosen_class=item.proposal, proposal_shown=item.proposal,
                timestamp_ms=36_000 * i, batch_id=batch.batch_id,
            )
            for i, item in enumerate(batch.items)
        ]
        service.submit_annotations("camp", records)
        progress = service.progress("camp")
        # 10 incomplete images at rate 100/h; the workload formula bounds
        # the estimate between all-consensus and all-escalation
        assert progress["estimated_remaining_hours"] is not None
        assert 10 * 2 / 100 <= progress["estimated_remaining_hours"] <= 10 * 4 / 100

    def test_export_method_validation(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(use_proposals=False), annotate_entries_plain(3)
        )
        with pytest.raises(ValueError, match="proposals"):
            service.export("camp", Method.CLEVERLABEL)
        with pytest.raises(ValueError, match="exportable"):
            service.export("camp", Method.BIAS_CORRECT_ONLY)

    def test_export_formats(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=2), annotate_entries(2))
        batch = service.next_batch("camp", "ann", now_ms=0)
        submit_batch(service, "camp", batch, lambda it: it.proposal, 1000)
        csv_text = service.export_text("camp", Method.RAW, "csv")
        assert csv_text.startswith("image_id,p_0,p_1,p_2,n_annotations,method")
        jsonl_text = service.export_text("camp", Method.RAW, "jsonl")
        rows = [json.loads(line) for line in jsonl_text.strip().splitlines()]
        assert all(row["method"] == "RAW" for row in rows)


def annotate_entries_plain(n, k=3):
    return [
        ManifestEntry(
            image_id=f"img-{i:03d}", uri=f"file:///{i}.png", subset_tag=SubsetTag.ANNOTATE
        )
        for i in range(n)
    ]


class TestReplay:
    def test_reload_reconstructs_state(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(
            make_config(a_cons=2, a_full=4, batch_size=4), annotate_entries(4)
        )
        for i, annotator in enumerate(("a1", "a2")):
            batch = service.next_batch("camp", annotator, now_ms=i * 1000)
            submit_batch(service, "camp", batch, lambda it: it.proposal, 10_000 * (i + 1))
        service.exclude_annotator("camp", "a2")
        progress_before = service.progress("camp")
        export_before = service.export_text("camp", Method.RAW, "csv")

        reloaded = CampaignService(tmp_path)  # fresh instance: full replay
        assert reloaded.progress("camp") == progress_before
        assert reloaded.export_text("camp", Method.RAW, "csv") == export_before

    def test_replay_continues_batch_sequence(self, tmp_path):
        service = CampaignService(tmp_path)
        service.create_campaign(make_config(batch_size=1), annotate_entries(4))
        b0 = service.next_batch("camp", "ann", now_ms=0)
        reloaded = CampaignService(tmp_path)
        b1 = reloaded.next_batch("camp", "other", now_ms=1)
        assert b0.batch_id != b1.batch_id
        assert b1.batch_id.endswith("b000001")
