/**
 * Annotator app: loads batches, tracks the session, renders, submits.
 * One in-flight batch at a time; submissions are serialized through the
 * session phase.
 */

import { ApiClient, ApiError, isEmptyBatch } from "./api.js";
import { BatchSession } from "./state.js";
import { GridView, type ViewStatus } from "./view.js";
import type { UiConfig } from "./types.js";

export class AnnotatorApp {
  readonly api: ApiClient;
  private view: GridView;
  session: BatchSession | null = null;
  status: ViewStatus = { kind: "loading" };

  constructor(
    private readonly root: HTMLElement,
    private readonly config: UiConfig,
    api?: ApiClient,
    private readonly clock: () => number = () => Date.now(),
  ) {
    this.api = api ?? new ApiClient(config);
    this.view = new GridView(root, config, {
      onSelect: (tile, cls) => this.select(tile, cls),
      onFocus: (tile) => this.focus(tile),
      onBulkAccept: () => this.bulkAccept(),
      onSubmit: () => void this.submit(),
      onRetry: () => void this.loadBatch(),
    });
    this.bindKeyboard();
  }

  private render(): void {
    this.view.render(this.status, this.session);
  }

  async loadBatch(): Promise<void> {
    this.status = { kind: "loading" };
    this.session = null;
    this.render();
    try {
      const batch = await this.api.nextBatch();
      if (isEmptyBatch(batch)) {
        this.status = { kind: "no-work", reason: batch.reason };
      } else {
        this.session = new BatchSession(batch, this.config, this.clock);
        this.status = { kind: "batch" };
      }
    } catch (error) {
      const message =
        error instanceof ApiError ? error.message : String(error);
      this.status = { kind: "error", message };
    }
    this.render();
  }

  select(tileIndex: number, cls: number): void {
    if (this.session === null) return;
    this.session.overrideTile(tileIndex, cls);
    this.session.focusIndex = tileIndex;
    this.render();
  }

  focus(tileIndex: number): void {
    if (this.session === null) return;
    this.session.focusIndex = tileIndex;
    this.render();
  }

  bulkAccept(): void {
    if (this.session === null) return;
    this.session.bulkAccept();
    this.render();
  }

  async submit(): Promise<void> {
    const session = this.session;
    if (session === null || !session.canSubmit()) return;
    const payload = session.buildPayload();
    session.phase = "submitting";
    this.render();
    try {
      const result = await this.api.submitAnnotations(payload);
      session.applySubmitResult(result.accepted, result.rejected);
    } catch (error) {
      // nothing was recorded locally as submitted: allow a retry
      session.phase = "annotating";
      this.status = {
        kind: "error",
        message: error instanceof ApiError ? error.message : String(error),
      };
      this.render();
      return;
    }
    this.status = { kind: "batch" };
    this.render();
  }

  private bindKeyboard(): void {
    this.root.addEventListener("keydown", (event: Event) => {
      const key = (event as KeyboardEvent).key;
      if (this.session === null) return;
      if (key >= "1" && key <= "9") {
        if (this.session.hotkey(Number(key))) {
          event.preventDefault();
          this.render();
        }
      } else if (key === "ArrowRight") {
        this.session.moveFocus(1);
        this.render();
      } else if (key === "ArrowLeft") {
        this.session.moveFocus(-1);
        this.render();
      } else if (key === "Enter" && this.session.canSubmit()) {
        void this.submit();
      }
    });
  }
}
