/**
 * DOM rendering for the annotation grid.
 *
 * The whole view re-renders from state on every change; batches are a few
 * dozen tiles, so diffing buys nothing.
 */

import type { BatchSession } from "./state.js";
import type { UiConfig } from "./types.js";

export type ViewStatus =
  | { kind: "loading" }
  | { kind: "no-work"; reason: string }
  | { kind: "error"; message: string }
  | { kind: "batch" };

export interface ViewCallbacks {
  onSelect(tileIndex: number, cls: number): void;
  onFocus(tileIndex: number): void;
  onBulkAccept(): void;
  onSubmit(): void;
  onRetry(): void;
}

export class GridView {
  constructor(
    private readonly root: HTMLElement,
    private readonly config: UiConfig,
    private readonly callbacks: ViewCallbacks,
  ) {}

  render(status: ViewStatus, session: BatchSession | null): void {
    this.root.textContent = "";
    if (status.kind === "loading") {
      this.root.appendChild(el("p", "status loading", "loading batch..."));
      return;
    }
    if (status.kind === "no-work") {
      const banner = el("div", "status no-work");
      banner.appendChild(el("p", "", "No work available."));
      banner.appendChild(el("p", "muted", status.reason));
      banner.appendChild(this.retryButton("Check again"));
      this.root.appendChild(banner);
      return;
    }
    if (status.kind === "error") {
      const banner = el("div", "status error-banner");
      banner.appendChild(el("p", "", `Service error: ${status.message}`));
      banner.appendChild(this.retryButton("Retry"));
      this.root.appendChild(banner);
      return;
    }
    if (session === null) {
      return;
    }
    this.renderBatch(session);
  }

  private retryButton(label: string): HTMLButtonElement {
    const button = el("button", "retry") as HTMLButtonElement;
    button.textContent = label;
    button.addEventListener("click", () => this.callbacks.onRetry());
    return button;
  }

  private renderBatch(session: BatchSession): void {
    const header = el("div", "toolbar");
    header.appendChild(el("span", "batch-id", `batch ${session.batchId}`));

    const hasProposals = session.tiles.some((t) => t.proposal !== null);
    if (hasProposals && session.phase === "annotating") {
      const bulk = el("button", "bulk-accept") as HTMLButtonElement;
      bulk.textContent = "Accept all proposals";
      bulk.addEventListener("click", () => this.callbacks.onBulkAccept());
      header.appendChild(bulk);
    }

    const submit = el("button", "submit") as HTMLButtonElement;
    submit.textContent =
      session.phase === "completed" ? "Submitted" : "Submit batch";
    submit.disabled = !session.canSubmit();
    submit.addEventListener("click", () => this.callbacks.onSubmit());
    header.appendChild(submit);
    this.root.appendChild(header);

    if (session.phase === "completed") {
      this.root.appendChild(
        el(
          "p",
          "status completed",
          `Batch complete: ${session.lastAccepted} annotations accepted.`,
        ),
      );
    }

    const palette = el("div", "palette");
    this.config.classNames.forEach((name, cls) => {
      const key = cls < 9 ? `[${cls + 1}] ` : "";
      palette.appendChild(el("span", "palette-entry", `${key}${name}`));
    });
    this.root.appendChild(palette);

    const grid = el("div", "grid");
    session.tiles.forEach((tile, index) => {
      const cell = el("div", "tile");
      cell.dataset.imageId = tile.imageId;
      if (index === session.focusIndex) cell.classList.add("focused");
      if (tile.selection !== null) cell.classList.add("selected");
      if (tile.confirmed) cell.classList.add("confirmed");
      if (tile.rejectedReason !== null) cell.classList.add("rejected");
      cell.tabIndex = 0;
      cell.addEventListener("focus", () => this.callbacks.onFocus(index));
      cell.addEventListener("click", () => this.callbacks.onFocus(index));

      const img = el("img", "thumb") as HTMLImageElement;
      img.src = tile.uri;
      img.alt = tile.imageId;
      cell.appendChild(img);

      if (tile.proposal !== null) {
        cell.appendChild(
          el(
            "span",
            "proposal-badge",
            `proposal: ${this.config.classNames[tile.proposal]}`,
          ),
        );
      }

      const buttons = el("div", "class-buttons");
      this.config.classNames.forEach((name, cls) => {
        const button = el("button", "class-button") as HTMLButtonElement;
        button.textContent = name;
        button.disabled = session.phase !== "annotating";
        if (tile.selection === cls) button.classList.add("active");
        button.addEventListener("click", (event) => {
          event.stopPropagation();
          this.callbacks.onSelect(index, cls);
        });
        buttons.appendChild(button);
      });
      cell.appendChild(buttons);

      if (tile.rejectedReason !== null) {
        cell.appendChild(el("span", "reject-reason", tile.rejectedReason));
      }
      grid.appendChild(cell);
    });
    this.root.appendChild(grid);
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}
