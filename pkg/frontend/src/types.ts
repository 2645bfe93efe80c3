/** Wire types for the session service (schema version 1). */

export const WIRE_VERSION = 1;

export interface RleMask {
  v: number;
  shape: [number, number]; // [height, width]
  runs: Array<[number, number]>; // [class value, run length], row-major
}

export interface SessionInfo {
  v: number;
  session_id: string;
  height: number;
  width: number;
  num_classes: number;
  model_version: number;
  evaluation: boolean;
}

export interface ClickResponse {
  v: number;
  session_id: string;
  t: number;
  model_version: number;
  mask: RleMask;
  timings: { total_s: number };
}

export interface FinishResponse {
  v: number;
  session_id: string;
  updates_applied: number;
  model_version: number;
  dice?: number;
}

export interface StatusResponse {
  v: number;
  model_loaded: boolean;
  model_version: number | null;
  checkpoint_id: string | null;
  num_classes: number | null;
  open_sessions: number;
  config: Record<string, unknown>;
}

export interface ClickRecord {
  row: number;
  col: number;
  classLabel: number;
  t: number;
  latencyMs: number;
  modelVersion: number;
}
