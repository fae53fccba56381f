// Shared helpers for the console tests: a recording surface, polyline
// geometry, and SVG trace extraction.

import type { PathPoint } from "../src/pathbuffer.js";
import type { StrokeSurface } from "../src/canvas.js";

export interface DrawOp {
  kind: "clear" | "polyline" | "dot";
  color?: string;
  points?: PathPoint[];
}

export class FakeSurface implements StrokeSurface {
  // Only the latest frame is kept: the view redraws the whole scene every
  // event, so recording history would grow quadratically.
  ops: DrawOp[] = [];

  clear(): void {
    this.ops = [{ kind: "clear" }];
  }

  polyline(points: PathPoint[], color: string): void {
    this.ops.push({ kind: "polyline", color, points: points.map((p) => ({ ...p })) });
  }

  dot(x: number, y: number, _r: number, color: string): void {
    this.ops.push({ kind: "dot", color, points: [{ x, y }] });
  }

  /** Ops since the last clear. */
  lastFrame(): DrawOp[] {
    const i = this.ops.map((o) => o.kind).lastIndexOf("clear");
    return this.ops.slice(i + 1);
  }
}

function pointToSegment(p: PathPoint, a: PathPoint, b: PathPoint): number {
  const dx = b.x - a.x;
  const dy = b.y - a.y;
  const len2 = dx * dx + dy * dy;
  let t = 0;
  if (len2 > 0) {
    t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = Math.max(0, Math.min(1, t));
  }
  const qx = a.x + t * dx;
  const qy = a.y + t * dy;
  return Math.hypot(p.x - qx, p.y - qy);
}

function pointToPolylines(p: PathPoint, polys: PathPoint[][]): number {
  let best = Infinity;
  for (const poly of polys) {
    if (poly.length === 1) {
      best = Math.min(best, Math.hypot(p.x - poly[0]!.x, p.y - poly[0]!.y));
      continue;
    }
    for (let i = 0; i + 1 < poly.length; i++) {
      best = Math.min(best, pointToSegment(p, poly[i]!, poly[i + 1]!));
      if (best === 0) return 0;
    }
  }
  return best;
}

function directedHausdorff(from: PathPoint[][], to: PathPoint[][]): number {
  let worst = 0;
  for (const poly of from) {
    for (const p of poly) {
      worst = Math.max(worst, pointToPolylines(p, to));
    }
  }
  return worst;
}

export function setHausdorff(a: PathPoint[][], b: PathPoint[][]): number {
  return Math.max(directedHausdorff(a, b), directedHausdorff(b, a));
}

/** Pen-down polylines of a service trace SVG, converted back to machine mm. */
export function svgTracePolylines(svg: string): PathPoint[][] {
  const view = svg.match(/viewBox="0 0 ([\d.]+) ([\d.]+)"/);
  if (!view) throw new Error("no viewBox in SVG");
  const heightUnits = parseFloat(view[2]!);
  const group = svg.match(/<g[^>]*stroke="#c53030"[^>]*>([\s\S]*?)<\/g>/);
  if (!group) return [];
  const polylines: PathPoint[][] = [];
  for (const path of group[1]!.matchAll(/d="([^"]+)"/g)) {
    const pts: PathPoint[] = [];
    for (const m of path[1]!.matchAll(/[ML]([\d.-]+) ([\d.-]+)/g)) {
      const xu = parseFloat(m[1]!);
      const yu = parseFloat(m[2]!);
      pts.push({ x: xu / 10, y: (heightUnits - yu) / 10 });
    }
    if (pts.length >= 2) polylines.push(pts);
  }
  return polylines;
}

export async function until(
  cond: () => boolean,
  timeoutMs = 20_000,
  intervalMs = 25,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (cond()) return;
    await new Promise((r) => setTimeout(r, intervalMs));
  }
  throw new Error(`condition not met within ${timeoutMs} ms`);
}
