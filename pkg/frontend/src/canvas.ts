// Canvas rendering behind a minimal stroke-surface interface so the view
// logic is testable without a real CanvasRenderingContext2D.

import type { PathBuffer, PathPoint } from "./pathbuffer.js";

export interface StrokeSurface {
  clear(width: number, height: number): void;
  polyline(points: PathPoint[], color: string, width: number): void;
  dot(x: number, y: number, radius: number, color: string): void;
}

interface MinimalCtx {
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  lineJoin: CanvasLineJoin;
  lineCap: CanvasLineCap;
}

export class Canvas2DSurface implements StrokeSurface {
  constructor(private ctx: MinimalCtx) {
    ctx.lineJoin = "round";
    ctx.lineCap = "round";
  }

  clear(width: number, height: number): void {
    this.ctx.clearRect(0, 0, width, height);
    this.ctx.fillStyle = "#ffffff";
    this.ctx.fillRect(0, 0, width, height);
  }

  polyline(points: PathPoint[], color: string, width: number): void {
    if (points.length < 2) return;
    this.ctx.strokeStyle = color;
    this.ctx.lineWidth = width;
    this.ctx.beginPath();
    this.ctx.moveTo(points[0]!.x, points[0]!.y);
    for (let i = 1; i < points.length; i++) {
      this.ctx.lineTo(points[i]!.x, points[i]!.y);
    }
    this.ctx.stroke();
  }

  dot(x: number, y: number, radius: number, color: string): void {
    this.ctx.fillStyle = color;
    this.ctx.beginPath();
    this.ctx.arc(x, y, radius, 0, Math.PI * 2);
    this.ctx.fill();
  }
}

export const INK_COLOR = "#1a1a1a";
export const TRAVEL_COLOR = "#c9d4e3";
export const PEN_UP_COLOR = "#4a7dbd";
export const PEN_DOWN_COLOR = "#c53030";

/** Maps machine millimetres onto the canvas and draws the current scene. */
export class PlotterView {
  private scale = 1;
  private offsetX = 0;
  private offsetY = 0;
  private travelX = 220;
  private travelY = 160;

  constructor(
    private surface: StrokeSurface,
    readonly widthPx: number,
    readonly heightPx: number,
    margin = 12,
  ) {
    this.margin = margin;
    this.fit();
  }

  private margin: number;

  setTravel(xMm: number, yMm: number): void {
    if (xMm > 0 && yMm > 0 && (xMm !== this.travelX || yMm !== this.travelY)) {
      this.travelX = xMm;
      this.travelY = yMm;
      this.fit();
    }
  }

  private fit(): void {
    const usableW = this.widthPx - 2 * this.margin;
    const usableH = this.heightPx - 2 * this.margin;
    this.scale = Math.min(usableW / this.travelX, usableH / this.travelY);
    this.offsetX = this.margin;
    this.offsetY = this.margin;
  }

  get pxPerMm(): number {
    return this.scale;
  }

  /** Machine mm to canvas px; machine +y points away, canvas y grows down. */
  toPx(p: PathPoint): PathPoint {
    return {
      x: this.offsetX + p.x * this.scale,
      y: this.offsetY + (this.travelY - p.y) * this.scale,
    };
  }

  render(path: PathBuffer, pen: { x: number; y: number; penDown: boolean } | null): void {
    this.surface.clear(this.widthPx, this.heightPx);
    const border: PathPoint[] = [
      this.toPx({ x: 0, y: 0 }),
      this.toPx({ x: this.travelX, y: 0 }),
      this.toPx({ x: this.travelX, y: this.travelY }),
      this.toPx({ x: 0, y: this.travelY }),
      this.toPx({ x: 0, y: 0 }),
    ];
    this.surface.polyline(border, "#e3e7ee", 1);
    for (const run of path.travelPolylines()) {
      this.surface.polyline(run.map((p) => this.toPx(p)), TRAVEL_COLOR, 1);
    }
    for (const run of path.inkPolylines()) {
      this.surface.polyline(run.map((p) => this.toPx(p)), INK_COLOR, 1.6);
    }
    if (pen) {
      const at = this.toPx(pen);
      this.surface.dot(at.x, at.y, 4, pen.penDown ? PEN_DOWN_COLOR : PEN_UP_COLOR);
    }
  }

  exportInkPx(path: PathBuffer): PathPoint[][] {
    return path.inkPolylines().map((run) => run.map((p) => this.toPx(p)));
  }
}
