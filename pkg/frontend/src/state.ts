/**
 * Batch session state: tile selections, bulk accept, overrides, and
 * payload construction. Pure state transitions so the logic is testable
 * without a DOM.
 */

import { validatePayload } from "./schema.js";
import type {
  AnnotationRecord,
  RejectedRow,
  TaskBatch,
  UiConfig,
} from "./types.js";

export interface TileState {
  imageId: string;
  uri: string;
  proposal: number | null;
  /** Currently selected class; defaults to the proposal when present. */
  selection: number | null;
  /** True once the annotator explicitly confirmed (override/bulk/hotkey). */
  confirmed: boolean;
  /** Rejection reason from the last submission, if any. */
  rejectedReason: string | null;
}

export type SessionPhase = "annotating" | "submitting" | "completed";

export class BatchSession {
  readonly batchId: string;
  readonly tiles: TileState[];
  phase: SessionPhase = "annotating";
  focusIndex = 0;
  /** Result summary after a completed submission. */
  lastAccepted = 0;

  constructor(
    batch: TaskBatch,
    private readonly config: UiConfig,
    private readonly clock: () => number = () => Date.now(),
  ) {
    this.batchId = batch.batch_id;
    this.tiles = batch.items.map((item) => ({
      imageId: item.image_id,
      uri: item.uri,
      proposal: item.proposal,
      selection: item.proposal,
      confirmed: false,
      rejectedReason: null,
    }));
  }

  get k(): number {
    return this.config.classNames.length;
  }

  /** Pre-selected tiles count as answered unless strict mode is on. */
  canSubmit(): boolean {
    if (this.phase !== "annotating" || this.tiles.length === 0) {
      return false;
    }
    return this.tiles.every(
      (tile) =>
        tile.selection !== null &&
        (!this.config.strictConfirmation || tile.confirmed),
    );
  }

  /** Accept the shown proposal on every tile that has one. */
  bulkAccept(): void {
    if (this.phase !== "annotating") return;
    for (const tile of this.tiles) {
      if (tile.proposal !== null) {
        tile.selection = tile.selection ?? tile.proposal;
        tile.confirmed = true;
      }
    }
  }

  /** Explicitly set a tile's class. */
  overrideTile(index: number, cls: number): void {
    if (this.phase !== "annotating") return;
    if (index < 0 || index >= this.tiles.length) {
      throw new RangeError(`tile ${index} out of range`);
    }
    if (cls < 0 || cls >= this.k) {
      throw new RangeError(`class ${cls} out of range for K=${this.k}`);
    }
    const tile = this.tiles[index];
    tile.selection = cls;
    tile.confirmed = true;
  }

  moveFocus(delta: number): void {
    if (this.tiles.length === 0) return;
    const next = this.focusIndex + delta;
    this.focusIndex = Math.min(Math.max(next, 0), this.tiles.length - 1);
  }

  /** Hotkey 1..9 selects classNames[digit-1] on the focused tile. */
  hotkey(digit: number): boolean {
    const cls = digit - 1;
    if (cls < 0 || cls >= this.k || this.phase !== "annotating") {
      return false;
    }
    this.overrideTile(this.focusIndex, cls);
    return true;
  }

  countDifferingFromProposal(): number {
    return this.tiles.filter(
      (tile) => tile.proposal !== null && tile.selection !== tile.proposal,
    ).length;
  }

  /**
   * Build the submission payload. Every record echoes the proposal that
   * was shown on its tile; the layout matches the service's annotation
   * JSONL schema exactly and is validated before it is returned.
   */
  buildPayload(): AnnotationRecord[] {
    if (!this.canSubmit()) {
      throw new Error("not every tile has an explicit selection");
    }
    const base = this.clock();
    const records = this.tiles.map((tile, index) => ({
      image_id: tile.imageId,
      annotator_id: this.config.annotatorId,
      chosen_class: tile.selection as number,
      proposal_shown: tile.proposal,
      timestamp_ms: base + index,
      batch_id: this.batchId,
    }));
    const error = validatePayload(records, this.k);
    if (error !== null) {
      throw new Error(`payload failed schema validation: ${error}`);
    }
    return records;
  }

  /** Apply the service's verdict to the session. */
  applySubmitResult(accepted: number, rejected: RejectedRow[]): void {
    this.lastAccepted = accepted;
    const byImage = new Map(rejected.map((row) => [row.image_id, row.reason]));
    for (const tile of this.tiles) {
      tile.rejectedReason = byImage.get(tile.imageId) ?? null;
    }
    const onlyDuplicates =
      rejected.length > 0 && rejected.every((row) => row.reason === "duplicate");
    if (rejected.length === 0 || onlyDuplicates) {
      // everything landed (now or previously): the batch is done
      this.phase = "completed";
    } else {
      this.phase = "annotating";
    }
  }
}
