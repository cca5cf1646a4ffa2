/** Thin client for the campaign service; fetch is injectable for tests. */

import type {
  AnnotationRecord,
  EmptyBatch,
  SubmitResult,
  TaskBatch,
  UiConfig,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number | null = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  private readonly fetchFn: FetchLike;

  constructor(
    private readonly config: UiConfig,
    fetchFn?: FetchLike,
  ) {
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private url(path: string): string {
    return `${this.config.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async nextBatch(): Promise<TaskBatch | EmptyBatch> {
    const params = new URLSearchParams({ annotator: this.config.annotatorId });
    if (this.config.batchSize !== undefined) {
      params.set("size", String(this.config.batchSize));
    }
    const path = `/api/campaigns/${encodeURIComponent(this.config.campaignId)}/next-batch?${params}`;
    let response: Response;
    try {
      response = await this.fetchFn(this.url(path));
    } catch (error) {
      throw new ApiError(`service unreachable: ${String(error)}`);
    }
    if (!response.ok) {
      throw new ApiError(await safeDetail(response), response.status);
    }
    return (await response.json()) as TaskBatch | EmptyBatch;
  }

  async submitAnnotations(records: AnnotationRecord[]): Promise<SubmitResult> {
    const path = `/api/campaigns/${encodeURIComponent(this.config.campaignId)}/annotations`;
    let response: Response;
    try {
      response = await this.fetchFn(this.url(path), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ records }),
      });
    } catch (error) {
      throw new ApiError(`service unreachable: ${String(error)}`);
    }
    if (!response.ok) {
      throw new ApiError(await safeDetail(response), response.status);
    }
    return (await response.json()) as SubmitResult;
  }
}

async function safeDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: string };
    return body.detail ?? `HTTP ${response.status}`;
  } catch {
    return `HTTP ${response.status}`;
  }
}

export function isEmptyBatch(
  batch: TaskBatch | EmptyBatch,
): batch is EmptyBatch {
  return batch.batch_id === null;
}
