"""Command-line entry point: plan, simulate, gate, postprocess, serve, export.

Exit codes: 0 success, 2 input error, 3 I/O error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import export as export_mod
from . import scenario as scen
from .config import CampaignConfig
from .labels import aggregate
from .planning import (
    ConfidenceQuery,
    estimate_workload,
    near_one_interval,
    recommend_strategy,
    wald_interval,
)
from .postprocessing import Method
from .service.core import CampaignService
from .service.store import iter_jsonl, record_from_dict
from .simulation import (
    annotate_image,
    run_campaign,
    strategy_sweep,
    sweep_rows_to_csv,
    _image_rng,
)

EXIT_INPUT = 2
EXIT_IO = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Soft-label annotation campaign toolkit."""


# ---------------------------------------------------------------- plan


@main.command()
@click.argument("scenario_path", type=click.Path())
@click.option("--out", "out_path", default="recommendation.json", show_default=True,
              help="Where to write the recommendation document.")
@click.option("--table", "tables", multiple=True,
              type=click.Choice(["wald", "near-one"]),
              help="Print a confidence reference table.")
def plan(scenario_path, out_path, tables):
    """Recommend a strategy and size the annotation workload."""
    try:
        doc = scen.load_scenario(scenario_path)
        inputs = scen.parse_strategy(doc)
        recommendation = recommend_strategy(inputs)
    except scen.ScenarioError as exc:
        _fail(EXIT_INPUT, str(exc))

    click.echo(
        "annotate {} proposals; post-process: {}".format(
            "WITH" if recommendation.use_proposals else "WITHOUT",
            recommendation.postprocessing.value,
        )
    )
    click.echo(f"platform hint: {recommendation.platform_hint.value}")
    for warning in recommendation.warnings:
        click.echo(f"warning: {warning}")
    click.echo("rationale:")
    for step in recommendation.rationale_trail:
        click.echo(f"  [{step.decision_point}] {step.branch}: {step.reason}")

    payload = {"recommendation": recommendation.to_dict()}

    if "workload" in doc:
        try:
            workload = scen.parse_workload(doc)
        except scen.ScenarioError as exc:
            _fail(EXIT_INPUT, str(exc))
        estimate = estimate_workload(workload)
        click.echo(
            f"expected annotations: {estimate.expected_annotations:.0f}"
            f" ({estimate.hours:.1f} h at {workload.annotations_per_hour:.0f}/h)"
        )
        payload["workload"] = {
            "expected_annotations": estimate.expected_annotations,
            "hours": estimate.hours,
        }

    for table in tables:
        if table == "wald":
            click.echo("wald interval widths (p=0.5):")
            for n in (3, 10, 50):
                width = wald_interval(ConfidenceQuery(p=0.5, n_annotations=n)).width
                click.echo(f"  A={n:>3}  W={width:.2f}")
        elif table == "near-one":
            click.echo("near-one 95% lower bounds:")
            for n in (3, 10, 50):
                click.echo(f"  A={n:>3}  lower={near_one_interval(n).lower:.2f}")

    try:
        Path(out_path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        _fail(EXIT_IO, f"cannot write {out_path}: {exc}")


# ---------------------------------------------------------------- simulate


@main.command()
@click.argument("scenario_path", type=click.Path())
@click.option("--seeds", default=1, show_default=True, help="Number of annotation seeds.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
def simulate(scenario_path, seeds, out_dir):
    """Run the Monte-Carlo campaign simulator."""
    try:
        doc = scen.load_scenario(scenario_path)
        data = scen.parse_dataset(doc)
        profiles = scen.parse_profiles(doc)
        config = scen.parse_campaign(doc)
        methods = scen.parse_methods(doc)
        sweep = scen.parse_sweep(doc)
        bias_probe = scen.parse_bias_probe(doc)
        if seeds < 1:
            raise scen.ScenarioError("--seeds must be >= 1")
    except scen.ScenarioError as exc:
        _fail(EXIT_INPUT, str(exc))

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail(EXIT_IO, f"cannot create {out_dir}: {exc}")

    seed_values = [data.seed + 1 + i for i in range(seeds)]
    method_sums: dict[str, float] = {}
    reports = []
    try:
        for seed in seed_values:
            run = data.with_seed(seed)
            report = run_campaign(run, profiles, config, methods)
            reports.append((seed, report))
            for name, value in report.per_method_kl.items():
                method_sums[name] = method_sums.get(name, 0.0) + value
            (out / f"report-{seed}.json").write_text(
                json.dumps({"seed": seed, **report.to_dict()}, indent=2, sort_keys=True)
                + "\n",
                encoding="utf-8",
            )
            if sweep is not None:
                speedup, points = sweep
                rows = strategy_sweep(run, profiles, points, speedup, config)
                (out / f"sweep-{seed}.csv").write_text(
                    sweep_rows_to_csv(rows), encoding="utf-8"
                )

        aggregate_doc = {
            "seeds": seed_values,
            "mean_kl": {
                name: method_sums[name] / len(seed_values)
                for name in sorted(method_sums)
            },
            "mean_consensus_fraction": (
                sum(r.measured_consensus_fraction for _, r in reports) / len(reports)
            ),
            "measured_speedup": reports[0][1].measured_speedup,
        }
        (out / "aggregate.json").write_text(
            json.dumps(aggregate_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        lines = ["method,mean_kl"]
        for name in sorted(method_sums):
            lines.append(f"{name},{method_sums[name] / len(seed_values):.10g}")
        (out / "aggregate.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

        if bias_probe is not None:
            _write_bias_probe(out, data, profiles, bias_probe)
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"wrote {len(seed_values)} report(s) to {out}")


def _write_bias_probe(out: Path, data, profiles, probe: dict) -> None:
    """Measure E[aggregate[proposal]] - gt[proposal] per acceptance offset.

    The expected excess is delta * (1 - gt[proposal]); the CSV carries both
    so the probe doubles as a calibration check.
    """
    import dataclasses

    n = probe["annotations"]
    lines = ["delta,measured_bias,predicted_bias"]
    for delta in probe["delta_values"]:
        probed = [dataclasses.replace(p, delta=delta) for p in profiles]
        measured = 0.0
        predicted = 0.0
        for img in data.images:
            rng = _image_rng(data.seed, img.image_id, f"bias-probe-{delta}")
            labels = annotate_image(
                img.gt, img.proposal, probed, n, n, rng, image_id=img.image_id
            )
            agg = aggregate(labels, data.k)
            measured += agg.probs[img.proposal] - img.gt.probs[img.proposal]
            predicted += delta * (1.0 - img.gt.probs[img.proposal])
        lines.append(
            f"{delta:.6g},{measured / len(data.images):.10g},"
            f"{predicted / len(data.images):.10g}"
        )
    (out / "bias.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- postprocess


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(), help="Annotation JSONL log.")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Campaign config JSON.")
@click.option("--method", default="RAW", show_default=True, help="RAW, CLEVERLABEL, or BLEND_ONLY.")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None,
              help="Optional manifest JSONL; restricts output to its ANNOTATE images.")
@click.option("--exclude", "excluded", multiple=True, help="Annotator ids to drop.")
def postprocess(log_path, config_path, method, manifest_path, excluded):
    """Post-process an annotation log into a soft-label CSV on stdout."""
    try:
        method_enum = Method(method.upper())
    except ValueError:
        _fail(EXIT_INPUT, f"unknown method {method!r}")
    if method_enum not in (Method.RAW, Method.CLEVERLABEL, Method.BLEND_ONLY):
        _fail(EXIT_INPUT, f"method {method_enum.value} is not exportable")

    try:
        config = CampaignConfig.from_dict(
            json.loads(Path(config_path).read_text(encoding="utf-8"))
        )
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {config_path}: {exc}")
    except (ValueError, KeyError) as exc:
        _fail(EXIT_INPUT, f"{config_path}: {exc}")

    records = []
    try:
        for line_no, doc in iter_jsonl(Path(log_path)):
            try:
                records.append(record_from_dict(doc))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{Path(log_path).name}:{line_no}: {exc}") from None
    except OSError as exc:
        _fail(EXIT_IO, f"cannot read {log_path}: {exc}")
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))

    image_ids = None
    if manifest_path is not None:
        from .service.store import ManifestEntry, SubsetTag

        image_ids = set()
        try:
            for line_no, doc in iter_jsonl(Path(manifest_path)):
                entry = ManifestEntry.from_dict(doc)
                if entry.subset_tag is SubsetTag.ANNOTATE:
                    image_ids.add(entry.image_id)
        except OSError as exc:
            _fail(EXIT_IO, f"cannot read {manifest_path}: {exc}")
        except (KeyError, ValueError) as exc:
            _fail(EXIT_INPUT, f"{manifest_path}: {exc}")

    try:
        rows = export_mod.build_rows(
            records,
            config.postprocess,
            method_enum,
            image_ids=image_ids,
            excluded_annotators=frozenset(excluded),
        )
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    click.echo(export_mod.rows_to_csv(rows, config.k), nl=False)


# ---------------------------------------------------------------- gate


@main.command()
@click.option("--store-dir", required=True, type=click.Path(), help="Campaign store directory.")
@click.option("--campaign", "campaign_id", required=True, help="Campaign id.")
@click.option("--exclude", "exclude_id", default=None,
              help="Exclude this annotator before printing the table.")
def gate(store_dir, campaign_id, exclude_id):
    """Print annotator qualification status for a campaign."""
    service = CampaignService(store_dir)
    try:
        if exclude_id is not None:
            service.exclude_annotator(campaign_id, exclude_id)
            click.echo(f"excluded annotator {exclude_id}")
        progress = service.progress(campaign_id)
    except KeyError:
        _fail(EXIT_INPUT, f"unknown campaign {campaign_id!r}")
    except OSError as exc:
        _fail(EXIT_IO, str(exc))

    click.echo(f"{'annotator':<20} {'status':<12} {'annotations':>11} {'rate/h':>10}")
    for annotator_id, info in sorted(progress["annotators"].items()):
        rate = info["annotations_per_hour"]
        rate_text = f"{rate:.1f}" if rate is not None else "-"
        click.echo(
            f"{annotator_id:<20} {info['status']:<12} "
            f"{info['annotations']:>11} {rate_text:>10}"
        )
    detail = service.annotator_info(campaign_id, exclude_id) if exclude_id else None
    if detail is not None:
        click.echo(f"ledger for {exclude_id}: status={detail['status']}")


# ---------------------------------------------------------------- serve


@main.command()
@click.option("--store-dir", required=True, type=click.Path(), help="Campaign store directory.")
@click.option("--listen", default=None,
              help="host:port to bind (defaults to $LISTEN_ADDR or 127.0.0.1:8000).")
def serve(store_dir, listen):
    """Run the campaign HTTP service."""
    import uvicorn

    from .service.app import create_app

    address = listen or os.environ.get("LISTEN_ADDR", "127.0.0.1:8000")
    host, _, port_text = address.rpartition(":")
    if not host or not port_text.isdigit():
        _fail(EXIT_INPUT, f"invalid listen address {address!r} (expected host:port)")
    app = create_app(store_dir)
    uvicorn.run(app, host=host, port=int(port_text))


# ---------------------------------------------------------------- export


@main.command()
@click.option("--store-dir", required=True, type=click.Path(), help="Campaign store directory.")
@click.option("--campaign", "campaign_id", required=True, help="Campaign id.")
@click.option("--method", default="RAW", show_default=True)
@click.option("--format", "fmt", default="csv", show_default=True,
              type=click.Choice(["csv", "jsonl"]))
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write to a file instead of stdout.")
def export(store_dir, campaign_id, method, fmt, out_path):
    """Export post-processed soft labels from a campaign store."""
    try:
        method_enum = Method(method.upper())
    except ValueError:
        _fail(EXIT_INPUT, f"unknown method {method!r}")
    service = CampaignService(store_dir)
    try:
        text = service.export_text(campaign_id, method_enum, fmt)
    except KeyError:
        _fail(EXIT_INPUT, f"unknown campaign {campaign_id!r}")
    except ValueError as exc:
        _fail(EXIT_INPUT, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    if out_path is None:
        click.echo(text, nl=False)
    else:
        try:
            Path(out_path).write_text(text, encoding="utf-8")
        except OSError as exc:
            _fail(EXIT_IO, f"cannot write {out_path}: {exc}")


if __name__ == "__main__":
    main()
