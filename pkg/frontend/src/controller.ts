// Wires the API client, the event reducer, the path buffer, and the
// renderer together. No DOM here: the browser entry point injects a
// canvas surface and subscribes to state changes, and the test harness
// drives the same class headlessly.

import { ControlApi } from "./api.js";
import { PlotterView, StrokeSurface } from "./canvas.js";
import { ViewState, applyEvent, initialState, withConnection } from "./model.js";
import { PathBuffer, PathPoint } from "./pathbuffer.js";

export interface ControllerOptions {
  surface?: StrokeSurface;
  widthPx?: number;
  heightPx?: number;
  onState?: (s: ViewState) => void;
  reconnectDelayMs?: number;
}

function delay(ms: number, signal?: AbortSignal): Promise<void> {
  return new Promise((resolve) => {
    const t = setTimeout(done, ms);
    function done() {
      signal?.removeEventListener("abort", onAbort);
      resolve();
    }
    function onAbort() {
      clearTimeout(t);
      done();
    }
    signal?.addEventListener("abort", onAbort);
  });
}

export class ConsoleController {
  state: ViewState = initialState();
  readonly path = new PathBuffer();
  readonly view: PlotterView | null;

  private onState: (s: ViewState) => void;
  private reconnectDelayMs: number;

  constructor(readonly api: ControlApi, opts: ControllerOptions = {}) {
    this.view = opts.surface
      ? new PlotterView(opts.surface, opts.widthPx ?? 880, opts.heightPx ?? 640)
      : null;
    this.onState = opts.onState ?? (() => {});
    this.reconnectDelayMs = opts.reconnectDelayMs ?? 1000;
  }

  /** Subscribe to the event stream and keep the view current; reconnects
   * until the signal aborts. Resolves when the signal aborts. */
  async connect(signal: AbortSignal): Promise<void> {
    let first = true;
    while (!signal.aborted) {
      if (!first) {
        this.setState(withConnection(this.state, "reconnecting"));
        await delay(this.reconnectDelayMs, signal);
        if (signal.aborted) break;
      }
      first = false;
      try {
        for await (const ev of this.api.events(signal)) {
          if (ev.kind === "snapshot") {
            this.path.loadSnapshot(ev.data.path);
            this.setState(withConnection(applyEvent(this.state, ev), "live"));
            if (this.view) this.view.setTravel(this.state.travel.x, this.state.travel.y);
          } else {
            if (ev.kind === "phase" && ev.data.job_id && ev.data.job_id !== this.state.jobId) {
              this.path.clear(); // a new job starts a fresh picture
            }
            if (ev.kind === "position") {
              this.path.addSample(ev.data.x, ev.data.y, ev.data.pen_down);
            }
            this.setState(applyEvent(this.state, ev));
          }
          this.render();
        }
      } catch (err) {
        if (signal.aborted) break;
        // fall through to the reconnect delay
      }
    }
  }

  /** A stale console must never issue commands. */
  get canCommand(): boolean {
    return this.state.connection === "live";
  }

  async home(): Promise<void> {
    this.requireLive();
    await this.api.home();
  }

  async write(text: string): Promise<string> {
    this.requireLive();
    return this.api.write(text);
  }

  async abort(): Promise<void> {
    this.requireLive();
    if (this.state.jobId) {
      await this.api.abort(this.state.jobId);
    }
  }

  /** Ink path in machine millimetres, one polyline per stroke. */
  exportInkMm(): PathPoint[][] {
    return this.path.inkPolylines();
  }

  /** Ink path in canvas pixels (requires a rendering surface). */
  exportInkPx(): PathPoint[][] {
    if (!this.view) throw new Error("no rendering surface attached");
    return this.view.exportInkPx(this.path);
  }

  private requireLive(): void {
    if (!this.canCommand) {
      throw new Error(`console is ${this.state.connection}; refusing to send commands`);
    }
  }

  private render(): void {
    if (this.view) {
      this.view.render(this.path, {
        x: this.state.position.x,
        y: this.state.position.y,
        penDown: this.state.penDown,
      });
    }
  }

  private setState(s: ViewState): void {
    this.state = s;
    this.onState(s);
  }
}
