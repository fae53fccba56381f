// Payload shapes of the control service's HTTP/JSON and event-stream API.

export interface JobReport {
  status: string;
  error: string | null;
  duration_s: number;
  homing_s: number;
  max_deviation_mm: number | null;
  writing_speed_mm_min: number | null;
  max_depth_error_mm: number | null;
  points_total: number;
  points_sent: number;
  points_done: number;
  text: string;
  lines: string[];
}

export interface JobState {
  id: string;
  phase: string;
  points_total: number;
  points_done: number;
  current_position_mm: number[];
  last_error: string | null;
  report: JobReport | null;
}

export interface PositionEvent {
  t: number;
  x: number;
  y: number;
  z: number;
  pen_down: boolean;
  queue_depth: number;
  homed?: boolean;
  mode?: string;
}

export interface PhaseEvent {
  phase: string;
  job_id?: string;
}

export interface JobProgressEvent {
  id: string;
  phase: string;
  points_done: number;
  points_total: number;
}

export interface DoneEvent {
  id: string;
  phase: string;
  error: string | null;
  report: JobReport | null;
}

export interface Snapshot {
  t: number;
  phase: string;
  machine_mode: string;
  homed: boolean;
  position: number[];
  pen_down: boolean;
  queue_depth: number;
  job: JobState | null;
  travel_mm: number[];
  // pen-down path so far; empty entries separate strokes
  path: number[][];
}

export type ServerEvent =
  | { kind: "snapshot"; data: Snapshot }
  | { kind: "phase"; data: PhaseEvent }
  | { kind: "position"; data: PositionEvent }
  | { kind: "job"; data: JobProgressEvent }
  | { kind: "done"; data: DoneEvent };
