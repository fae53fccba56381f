// Replay buffer of the pen's path in machine millimetres.
//
// Ink runs are contiguous pen-down stretches; travel runs connect them.
// The buffer can be rebuilt from a service snapshot so a reloaded page
// restores the picture of the current job.

export interface PathPoint {
  x: number;
  y: number;
}

export class PathBuffer {
  private ink: PathPoint[][] = [];
  private travel: PathPoint[][] = [];
  private lastDown = false;
  private hasSample = false;

  clear(): void {
    this.ink = [];
    this.travel = [];
    this.lastDown = false;
    this.hasSample = false;
  }

  addSample(x: number, y: number, penDown: boolean): void {
    const runs = penDown ? this.ink : this.travel;
    const startNew = !this.hasSample || penDown !== this.lastDown || runs.length === 0;
    if (startNew) {
      // bridge from the previous run's end so strokes connect visually
      const prev = penDown ? this.travel : this.ink;
      const lastRun = prev[prev.length - 1];
      const bridge = lastRun ? lastRun[lastRun.length - 1] : undefined;
      runs.push(bridge ? [{ ...bridge }] : []);
    }
    const run = runs[runs.length - 1]!;
    const last = run[run.length - 1];
    if (!last || last.x !== x || last.y !== y) {
      run.push({ x, y });
    }
    this.lastDown = penDown;
    this.hasSample = true;
  }

  /** Rebuild ink runs from a snapshot path (empty entries separate strokes). */
  loadSnapshot(path: number[][]): void {
    this.clear();
    let run: PathPoint[] = [];
    for (const entry of path) {
      if (entry.length < 2) {
        if (run.length > 0) this.ink.push(run);
        run = [];
      } else {
        run.push({ x: entry[0]!, y: entry[1]! });
      }
    }
    if (run.length > 0) this.ink.push(run);
    this.hasSample = this.ink.length > 0;
    this.lastDown = false;
  }

  inkPolylines(): PathPoint[][] {
    return this.ink.filter((r) => r.length >= 2).map((r) => r.slice());
  }

  travelPolylines(): PathPoint[][] {
    return this.travel.filter((r) => r.length >= 2).map((r) => r.slice());
  }

  get inkPointCount(): number {
    return this.ink.reduce((n, r) => n + r.length, 0);
  }
}
