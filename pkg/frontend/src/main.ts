// Browser entry point: binds the controller to the page.

import { ControlApi } from "./api.js";
import { Canvas2DSurface } from "./canvas.js";
import { ConsoleController } from "./controller.js";
import type { ViewState } from "./model.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("plot");
const ctx = canvas.getContext("2d");
if (!ctx) throw new Error("2d canvas unavailable");

const statusLine = el<HTMLSpanElement>("status");
const positionLine = el<HTMLSpanElement>("position");
const progressBar = el<HTMLProgressElement>("progress");
const readout = el<HTMLSpanElement>("readout");
const textBox = el<HTMLInputElement>("text");
const homeBtn = el<HTMLButtonElement>("home");
const writeBtn = el<HTMLButtonElement>("write");
const abortBtn = el<HTMLButtonElement>("abort");

const api = new ControlApi(window.location.origin.replace(/\/$/, ""));
const controller = new ConsoleController(api, {
  surface: new Canvas2DSurface(ctx),
  widthPx: canvas.width,
  heightPx: canvas.height,
  onState: renderState,
});

function renderState(s: ViewState): void {
  const busy = s.phase === "homing" || s.phase === "writing" || s.phase === "queued";
  statusLine.textContent =
    s.connection === "live"
      ? `${s.phase} (${s.machineMode}${s.homed ? ", homed" : ""})`
      : s.connection;
  positionLine.textContent =
    `X ${s.position.x.toFixed(2)}  Y ${s.position.y.toFixed(2)}  ` +
    `Z ${s.position.z.toFixed(2)} mm  queue ${s.queueDepth}`;
  progressBar.value = s.progress;
  homeBtn.disabled = !(controller.canCommand && !busy);
  writeBtn.disabled = !(controller.canCommand && !busy && s.homed);
  abortBtn.disabled = !(controller.canCommand && busy && s.jobId !== null);
  if (s.report) {
    const dev = s.report.max_deviation_mm;
    const speed = s.report.writing_speed_mm_min;
    readout.textContent =
      `${s.report.status}: deviation ${dev == null ? "n/a" : dev.toFixed(3) + " mm"}, ` +
      `speed ${speed == null ? "n/a" : speed.toFixed(1) + " mm/min"}`;
  } else if (s.lastError) {
    readout.textContent = `error: ${s.lastError}`;
  } else if (busy) {
    readout.textContent = "working";
  }
}

function report(err: unknown): void {
  readout.textContent = String(err instanceof Error ? err.message : err);
}

homeBtn.addEventListener("click", () => controller.home().catch(report));
writeBtn.addEventListener("click", () => {
  const text = textBox.value.trim();
  if (text) controller.write(text).catch(report);
});
abortBtn.addEventListener("click", () => controller.abort().catch(report));

const abort = new AbortController();
window.addEventListener("beforeunload", () => abort.abort());
void controller.connect(abort.signal);
