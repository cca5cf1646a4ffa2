/**
 * Client-side mirror of the service's annotation JSONL schema.
 *
 * Every payload we send is validated against this before it leaves the
 * browser, and the contract tests assert that stub-server round trips
 * reproduce the exact field set.
 */

import type { AnnotationRecord } from "./types.js";

const RECORD_FIELDS = [
  "image_id",
  "annotator_id",
  "chosen_class",
  "proposal_shown",
  "timestamp_ms",
  "batch_id",
] as const;

export function validateAnnotationRecord(
  value: unknown,
  k: number,
): string | null {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    return "record must be an object";
  }
  const record = value as Record<string, unknown>;
  for (const field of RECORD_FIELDS) {
    if (!(field in record)) {
      return `missing field ${field}`;
    }
  }
  for (const key of Object.keys(record)) {
    if (!(RECORD_FIELDS as readonly string[]).includes(key)) {
      return `unexpected field ${key}`;
    }
  }
  if (typeof record.image_id !== "string" || record.image_id.length === 0) {
    return "image_id must be a nonempty string";
  }
  if (typeof record.annotator_id !== "string" || record.annotator_id.length === 0) {
    return "annotator_id must be a nonempty string";
  }
  if (
    typeof record.chosen_class !== "number" ||
    !Number.isInteger(record.chosen_class) ||
    record.chosen_class < 0 ||
    record.chosen_class >= k
  ) {
    return `chosen_class must be an integer in [0, ${k})`;
  }
  if (record.proposal_shown !== null) {
    if (
      typeof record.proposal_shown !== "number" ||
      !Number.isInteger(record.proposal_shown) ||
      record.proposal_shown < 0 ||
      record.proposal_shown >= k
    ) {
      return `proposal_shown must be null or an integer in [0, ${k})`;
    }
  }
  if (
    typeof record.timestamp_ms !== "number" ||
    !Number.isInteger(record.timestamp_ms) ||
    record.timestamp_ms < 0
  ) {
    return "timestamp_ms must be a nonnegative integer";
  }
  if (typeof record.batch_id !== "string" || record.batch_id.length === 0) {
    return "batch_id must be a nonempty string";
  }
  return null;
}

export function validatePayload(
  records: AnnotationRecord[],
  k: number,
): string | null {
  for (let i = 0; i < records.length; i += 1) {
    const error = validateAnnotationRecord(records[i], k);
    if (error !== null) {
      return `record ${i}: ${error}`;
    }
  }
  return null;
}
