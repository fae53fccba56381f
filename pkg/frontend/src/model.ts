// Pure view-state reducer: everything the console shows derives from
// service events; nothing is simulated client-side.

import type { JobReport, ServerEvent } from "./types.js";

export type Connection = "connecting" | "live" | "reconnecting";

export interface ViewState {
  connection: Connection;
  phase: string;
  machineMode: string;
  homed: boolean;
  position: { x: number; y: number; z: number };
  penDown: boolean;
  queueDepth: number;
  travel: { x: number; y: number };
  jobId: string | null;
  pointsDone: number;
  pointsTotal: number;
  progress: number; // always within [0, 1]
  report: JobReport | null;
  lastError: string | null;
}

export function initialState(): ViewState {
  return {
    connection: "connecting",
    phase: "unknown",
    machineMode: "unknown",
    homed: false,
    position: { x: 0, y: 0, z: 0 },
    penDown: false,
    queueDepth: 0,
    travel: { x: 220, y: 160 },
    jobId: null,
    pointsDone: 0,
    pointsTotal: 0,
    progress: 0,
    report: null,
    lastError: null,
  };
}

function clamp01(v: number): number {
  if (!Number.isFinite(v)) return 0;
  return Math.min(1, Math.max(0, v));
}

export function withConnection(s: ViewState, connection: Connection): ViewState {
  return { ...s, connection };
}

export function applyEvent(s: ViewState, ev: ServerEvent): ViewState {
  switch (ev.kind) {
    case "snapshot": {
      const d = ev.data;
      return {
        ...s,
        phase: d.phase,
        machineMode: d.machine_mode,
        homed: d.homed,
        position: { x: d.position[0] ?? 0, y: d.position[1] ?? 0, z: d.position[2] ?? 0 },
        penDown: d.pen_down,
        queueDepth: d.queue_depth,
        travel: { x: d.travel_mm[0] ?? s.travel.x, y: d.travel_mm[1] ?? s.travel.y },
        jobId: d.job ? d.job.id : s.jobId,
        pointsDone: d.job ? d.job.points_done : s.pointsDone,
        pointsTotal: d.job ? d.job.points_total : s.pointsTotal,
        progress: d.job && d.job.points_total > 0
          ? clamp01(d.job.points_done / d.job.points_total)
          : s.progress,
        report: d.job?.report ?? s.report,
      };
    }
    case "phase": {
      const next: ViewState = { ...s, phase: ev.data.phase };
      if (ev.data.job_id && ev.data.job_id !== s.jobId) {
        // a new job took the machine: reset progress and readouts
        next.jobId = ev.data.job_id;
        next.pointsDone = 0;
        next.pointsTotal = 0;
        next.progress = 0;
        next.report = null;
        next.lastError = null;
      }
      return next;
    }
    case "position": {
      const d = ev.data;
      return {
        ...s,
        position: { x: d.x, y: d.y, z: d.z },
        penDown: d.pen_down,
        queueDepth: d.queue_depth,
        homed: d.homed ?? s.homed,
        machineMode: d.mode ?? s.machineMode,
      };
    }
    case "job": {
      const d = ev.data;
      return {
        ...s,
        jobId: d.id,
        pointsDone: d.points_done,
        pointsTotal: d.points_total,
        progress: d.points_total > 0 ? clamp01(d.points_done / d.points_total) : 0,
      };
    }
    case "done": {
      const d = ev.data;
      return {
        ...s,
        phase: d.phase,
        report: d.report,
        lastError: d.error,
        progress: d.phase === "done" ? 1 : s.progress,
      };
    }
  }
}
