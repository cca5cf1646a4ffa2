/**
 * Browser entry point. Configuration comes from the page URL:
 *
 *   index.html?service=http://localhost:8000&campaign=demo&annotator=ann-1
 *             &classes=grade0,grade1,grade2,grade3[&size=24][&strict=1]
 */

import { AnnotatorApp } from "./app.js";
import type { UiConfig } from "./types.js";

function configFromLocation(): UiConfig {
  const params = new URLSearchParams(window.location.search);
  const classes = (params.get("classes") ?? "").split(",").filter(Boolean);
  if (classes.length < 2) {
    throw new Error("missing ?classes=...: need at least two class names");
  }
  const config: UiConfig = {
    baseUrl: params.get("service") ?? window.location.origin,
    campaignId: params.get("campaign") ?? "",
    annotatorId: params.get("annotator") ?? "",
    classNames: classes,
    strictConfirmation: params.get("strict") === "1",
  };
  const size = params.get("size");
  if (size !== null) config.batchSize = Number(size);
  if (!config.campaignId || !config.annotatorId) {
    throw new Error("missing ?campaign= or ?annotator= parameter");
  }
  return config;
}

const root = document.getElementById("app");
if (root === null) {
  throw new Error("missing #app container");
}
try {
  const app = new AnnotatorApp(root, configFromLocation());
  void app.loadBatch();
} catch (error) {
  root.textContent = String(error);
}
