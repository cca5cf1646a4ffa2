"""Tests for the command-line interface."""

import json

import pytest
from click.testing import CliRunner

from softcamp.cli import main

VERSE_SCENARIO = {
    "strategy": {
        "n_images": 3761,
        "bias_acceptable": False,
        "expected_speedup": 1.1636,
        "class_prevalence": [0.9011, 0.0489, 0.03, 0.02],
        "annotator_pool": 5,
    },
    "workload": {
        "n_images": 3761,
        "consensus_fraction": 0.5,
        "annotations_consensus": 10,
        "annotations_full": 50,
        "annotations_per_hour": 2500,
    },
}

SIM_SCENARIO = {
    "dataset": {
        "generator": {"kind": "dirichlet", "k": 4, "n_images": 12, "seed": 5}
    },
    "annotators": [
        {"annotator_id": "a0", "delta": 0.1},
        {"annotator_id": "a1", "delta": 0.1},
    ],
    "campaign": {
        "campaign_id": "sim",
        "k": 4,
        "class_names": ["c0", "c1", "c2", "c3"],
        "a_cons": 3,
        "a_full": 9,
        "use_proposals": True,
        "postprocess": {
            "delta": 0.1,
            "confusion": [
                [0.7, 0.1, 0.1, 0.1],
                [0.1, 0.7, 0.1, 0.1],
                [0.1, 0.1, 0.7, 0.1],
                [0.1, 0.1, 0.1, 0.7],
            ],
        },
    },
    "methods": ["RAW", "CLEVERLABEL"],
}


def write_scenario(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


class TestPlan:
    def test_verse_scenario_golden(self, tmp_path):
        runner = CliRunner()
        path = write_scenario(tmp_path, VERSE_SCENARIO)
        out = str(tmp_path / "rec.json")
        result = runner.invoke(main, ["plan", path, "--out", out])
        assert result.exit_code == 0, result.output
        assert "annotate WITHOUT proposals; post-process: BLEND_ONLY" in result.output
        written = json.loads((tmp_path / "rec.json").read_text())
        assert written["recommendation"]["use_proposals"] is False
        assert written["recommendation"]["rationale_trail"]

    def test_wald_table(self, tmp_path):
        runner = CliRunner()
        path = write_scenario(tmp_path, VERSE_SCENARIO)
        result = runner.invoke(
            main, ["plan", path, "--out", str(tmp_path / "r.json"), "--table", "wald"]
        )
        assert result.exit_code == 0
        assert "W=1.13" in result.output
        assert "W=0.62" in result.output
        assert "W=0.28" in result.output

    def test_missing_field_exits_2(self, tmp_path):
        runner = CliRunner()
        doc = {"strategy": {"n_images": 10}}  # missing required fields
        path = write_scenario(tmp_path, doc)
        result = runner.invoke(main, ["plan", path, "--out", str(tmp_path / "r.json")])
        assert result.exit_code == 2
        assert "bias_acceptable" in result.output

    def test_invalid_json_exits_2_with_position(self, tmp_path):
        runner = CliRunner()
        path = tmp_path / "broken.json"
        path.write_text('{"strategy": \n oops}', encoding="utf-8")
        result = runner.invoke(main, ["plan", str(path), "--out", str(tmp_path / "r.json")])
        assert result.exit_code == 2
        assert "broken.json:2" in result.output

    def test_workload_summary_printed(self, tmp_path):
        runner = CliRunner()
        path = write_scenario(tmp_path, VERSE_SCENARIO)
        result = runner.invoke(main, ["plan", path, "--out", str(tmp_path / "r.json")])
        assert "112830" in result.output.replace(",", "")


class TestSimulate:
    def test_deterministic_outputs(self, tmp_path):
        runner = CliRunner()
        path = write_scenario(tmp_path, SIM_SCENARIO)
        out1, out2 = str(tmp_path / "run1"), str(tmp_path / "run2")
        r1 = runner.invoke(main, ["simulate", path, "--seeds", "2", "--out", out1])
        r2 = runner.invoke(main, ["simulate", path, "--seeds", "2", "--out", out2])
        assert r1.exit_code == 0, r1.output
        assert r2.exit_code == 0
        for name in ("report-6.json", "report-7.json", "aggregate.json", "aggregate.csv"):
            assert (tmp_path / "run1" / name).read_bytes() == (
                tmp_path / "run2" / name
            ).read_bytes()

    def test_seed_count_files(self, tmp_path):
        runner = CliRunner()
        path = write_scenario(tmp_path, SIM_SCENARIO)
        out = tmp_path / "runs"
        result = runner.invoke(main, ["simulate", path, "--seeds", "3", "--out", str(out)])
        assert result.exit_code == 0
        reports = sorted(p.name for p in out.glob("report-*.json"))
        assert len(reports) == 3
        assert (out / "aggregate.json").exists()

    def test_bias_probe_monotone(self, tmp_path):
        doc = dict(SIM_SCENARIO)
        doc["dataset"] = {
            "generator": {"kind": "dirichlet", "k": 4, "n_images": 4, "seed": 5,
                           "max_class_prob": 0.8}
        }
        doc["bias_probe"] = {"delta_values": [0.0, 0.1143, 0.3, 0.5], "annotations": 4000}
        runner = CliRunner()
        path = write_scenario(tmp_path, doc)
        out = tmp_path / "probe"
        result = runner.invoke(main, ["simulate", path, "--seeds", "1", "--out", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "bias.csv").read_text().strip().splitlines()
        assert lines[0] == "delta,measured_bias,predicted_bias"
        measured = [float(line.split(",")[1]) for line in lines[1:]]
        predicted = [float(line.split(",")[2]) for line in lines[1:]]
        assert measured == sorted(measured)  # monotone in delta
        for m, p in zip(measured, predicted):
            assert m == pytest.approx(p, abs=0.02)

    def test_schema_error_exits_2(self, tmp_path):
        runner = CliRunner()
        doc = dict(SIM_SCENARIO)
        doc.pop("campaign")
        path = write_scenario(tmp_path, doc)
        result = runner.invoke(main, ["simulate", path, "--seeds", "1", "--out", str(tmp_path / "x")])
        assert result.exit_code == 2


class TestPostprocess:
    def setup_log(self, tmp_path, with_proposals=True):
        config = {
            "campaign_id": "pp",
            "k": 2,
            "class_names": ["a", "b"],
            "a_cons": 2,
            "a_full": 4,
            "use_proposals": with_proposals,
            "postprocess": {"delta": 0.0, "confusion": [[1.0, 0.0], [0.0, 1.0]]},
        }
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        log_path = tmp_path / "log.jsonl"
        rows = [
            {"image_id": "x", "annotator_id": "a1", "chosen_class": 0,
             "proposal_shown": 0 if with_proposals else None, "timestamp_ms": 1, "batch_id": "b0"},
            {"image_id": "x", "annotator_id": "a2", "chosen_class": 0,
             "proposal_shown": 0 if with_proposals else None, "timestamp_ms": 2, "batch_id": "b0"},
            {"image_id": "x", "annotator_id": "a3", "chosen_class": 1,
             "proposal_shown": 0 if with_proposals else None, "timestamp_ms": 3, "batch_id": "b0"},
        ]
        log_path.write_text(
            "\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8"
        )
        return str(log_path), str(config_path)

    def test_raw_frequencies(self, tmp_path):
        log, config = self.setup_log(tmp_path)
        runner = CliRunner()
        result = runner.invoke(main, ["postprocess", "--log", log, "--config", config,
                                      "--method", "RAW"])
        assert result.exit_code == 0
        lines = result.output.strip().splitlines()
        assert lines[0] == "image_id,p_0,p_1,n_annotations,method"
        assert lines[1] == "x,0.666666666667,0.333333333333,3,RAW"

    def test_cleverlabel_without_proposals_exits_2(self, tmp_path):
        log, config = self.setup_log(tmp_path, with_proposals=False)
        runner = CliRunner()
        result = runner.invoke(main, ["postprocess", "--log", log, "--config", config,
                                      "--method", "CLEVERLABEL"])
        assert result.exit_code == 2

    def test_malformed_line_exits_2_with_number(self, tmp_path):
        log, config = self.setup_log(tmp_path)
        with open(log, "a", encoding="utf-8") as fh:
            fh.write("garbage\n")
        runner = CliRunner()
        result = runner.invoke(main, ["postprocess", "--log", log, "--config", config])
        assert result.exit_code == 2
        assert ":4" in result.output

    def test_exclude_flag(self, tmp_path):
        log, config = self.setup_log(tmp_path)
        runner = CliRunner()
        result = runner.invoke(main, ["postprocess", "--log", log, "--config", config,
                                      "--exclude", "a3"])
        assert result.exit_code == 0
        assert "x,1,0,2,RAW" in result.output


class TestUnknownMethod:
    def test_postprocess_unknown_method(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["postprocess", "--log", "a", "--config", "b",
                                      "--method", "NOPE"])
        assert result.exit_code == 2
