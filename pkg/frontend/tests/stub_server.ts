/**
 * In-process stub of the campaign service for contract tests.
 *
 * Mirrors the real endpoints' shapes and the submission rules the UI
 * depends on: per-row schema validation and duplicate rejection keyed on
 * (batch_id, image_id, annotator_id).
 */

import { validateAnnotationRecord } from "../src/schema.js";
import type {
  AnnotationRecord,
  RejectedRow,
  TaskBatch,
} from "../src/types.js";
import type { FetchLike } from "../src/api.js";

export interface StubOptions {
  k: number;
  batch: TaskBatch | null;
  /** When set, every request fails with this HTTP status. */
  failWith?: number;
}

export class StubServer {
  readonly submissions: AnnotationRecord[][] = [];
  readonly accepted: AnnotationRecord[] = [];
  private readonly seen = new Set<string>();

  constructor(private readonly options: StubOptions) {}

  get fetch(): FetchLike {
    return async (url, init) => this.handle(url, init);
  }

  private async handle(url: string, init?: RequestInit): Promise<Response> {
    if (this.options.failWith !== undefined) {
      return json({ detail: "stubbed failure" }, this.options.failWith);
    }
    const parsed = new URL(url, "http://stub.local");
    if (parsed.pathname.endsWith("/next-batch")) {
      if (this.options.batch === null) {
        return json({ batch_id: null, items: [], reason: "no work available" });
      }
      return json(this.options.batch);
    }
    if (parsed.pathname.endsWith("/annotations")) {
      const body = JSON.parse(String(init?.body ?? "{}")) as {
        records?: unknown[];
      };
      const records = (body.records ?? []) as AnnotationRecord[];
      this.submissions.push(records);
      const rejected: RejectedRow[] = [];
      let accepted = 0;
      records.forEach((record, index) => {
        const schemaError = validateAnnotationRecord(record, this.options.k);
        if (schemaError !== null) {
          rejected.push({ index, image_id: record.image_id, reason: schemaError });
          return;
        }
        const key = `${record.batch_id}|${record.image_id}|${record.annotator_id}`;
        if (this.seen.has(key)) {
          rejected.push({ index, image_id: record.image_id, reason: "duplicate" });
          return;
        }
        this.seen.add(key);
        this.accepted.push(record);
        accepted += 1;
      });
      return json({ accepted, rejected });
    }
    return json({ detail: `no stub route for ${parsed.pathname}` }, 404);
  }
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

export function proposalBatch(size: number, k: number): TaskBatch {
  return {
    batch_id: "camp-b000007",
    annotator_id: "ann-1",
    issued_at_ms: 1_700_000_000_000,
    training: false,
    items: Array.from({ length: size }, (_, i) => ({
      image_id: `img-${String(i).padStart(3, "0")}`,
      uri: `http://images.local/${i}.png`,
      proposal: i % k,
    })),
  };
}
