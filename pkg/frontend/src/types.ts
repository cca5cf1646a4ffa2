/** Wire types for the campaign service HTTP API. */

export interface BatchItem {
  image_id: string;
  uri: string;
  proposal: number | null;
}

export interface TaskBatch {
  batch_id: string;
  annotator_id: string;
  issued_at_ms: number;
  training: boolean;
  items: BatchItem[];
}

/** next-batch response when nothing is eligible. */
export interface EmptyBatch {
  batch_id: null;
  items: [];
  reason: string;
}

export interface AnnotationRecord {
  image_id: string;
  annotator_id: string;
  chosen_class: number;
  proposal_shown: number | null;
  timestamp_ms: number;
  batch_id: string;
}

export interface RejectedRow {
  index: number;
  image_id: string;
  reason: string;
}

export interface SubmitResult {
  accepted: number;
  rejected: RejectedRow[];
}

export interface UiConfig {
  /** Base URL of the campaign service, e.g. http://localhost:8000 */
  baseUrl: string;
  campaignId: string;
  annotatorId: string;
  /** Class palette in class-index order; hotkeys 1..9 follow this order. */
  classNames: string[];
  /** Batch size requested from the service (service default when absent). */
  batchSize?: number;
  /**
   * Strict mode: a proposal pre-selection only counts as an explicit
   * answer after bulk-accept or a per-tile confirmation. Off by default.
   */
  strictConfirmation?: boolean;
}
