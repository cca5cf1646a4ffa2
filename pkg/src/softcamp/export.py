"""Soft-label export tables.

One code path turns an annotation log into post-processed per-image rows;
the campaign service and the offline CLI both call it, so their outputs are
byte-identical for the same inputs.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

from .labels import ImageLabelSet
from .postprocessing import Method, PostprocessConfig, apply_method


@dataclass(frozen=True)
class ExportRow:
    image_id: str
    probs: tuple[float, ...]
    n_annotations: int
    method: str


def build_rows(
    records,
    cfg: PostprocessConfig,
    method: Method,
    *,
    image_ids=None,
    excluded_annotators=frozenset(),
) -> list[ExportRow]:
    """Group records per image and apply the method, in image_id order.

    ``image_ids`` restricts the output (e.g. to a campaign's ANNOTATE
    subset); records from ``excluded_annotators`` are dropped before
    aggregation.
    """
    by_image: dict[str, list] = {}
    for rec in records:
        if rec.annotator_id in excluded_annotators:
            continue
        if image_ids is not None and rec.image_id not in image_ids:
            continue
        by_image.setdefault(rec.image_id, []).append(rec)
    rows = []
    for image_id in sorted(by_image):
        labels = ImageLabelSet(image_id, tuple(by_image[image_id]))
        dist = apply_method(labels, method, cfg)
        rows.append(
            ExportRow(
                image_id=image_id,
                probs=dist.probs,
                n_annotations=len(labels.records),
                method=method.value,
            )
        )
    return rows


def csv_header(k: int) -> str:
    return "image_id," + ",".join(f"p_{i}" for i in range(k)) + ",n_annotations,method"


def rows_to_csv(rows, k: int) -> str:
    buf = io.StringIO()
    buf.write(csv_header(k) + "\n")
    for row in rows:
        probs = ",".join(f"{p:.12g}" for p in row.probs)
        buf.write(f"{row.image_id},{probs},{row.n_annotations},{row.method}\n")
    return buf.getvalue()


def rows_to_jsonl(rows) -> str:
    buf = io.StringIO()
    for row in rows:
        buf.write(
            json.dumps(
                {
                    "image_id": row.image_id,
                    "probs": list(row.probs),
                    "n_annotations": row.n_annotations,
                    "method": row.method,
                },
                sort_keys=True,
            )
            + "\n"
        )
    return buf.getvalue()
