/**
 * NDJSON policy protocol: typed records and a line framer for both socket
 * and child-process stdio transports. The environment speaks first (hello)
 * and the client acknowledges with the same protocol version.
 */

export const PROTOCOL_VERSION = 1;

export interface ActionDescriptor {
  index: number;
  omega: number;
  v: number;
  radius: number | null;
  kind: "in_place" | "turn";
}

export interface HelloRecord {
  type: "hello";
  version: number;
  ray_count: number;
  dt: number;
  limits: { omega_max: number; v_max: number; dt: number };
  footprint: [number, number];
  success_iou: number;
  actions: ActionDescriptor[];
}

export interface EpisodeRecord {
  type: "episode";
  episode: number;
  scenario_seed: number;
  class: string;
  stage: string;
  goal: [number, number, number];
}

export interface ObsRecord {
  type: "obs";
  episode: number;
  step: number;
  scan: number[];
  target: number[];
  mask: number[];
}

export interface StepRecord {
  type: "step";
  episode: number;
  step: number;
  reward?: { iou: number; distance: number; time: number; total: number };
  terminal: boolean;
  cause: string | null;
  executed?: { omega: number; v: number; index: number | null; source: string };
}

export interface EndRecord {
  type: "end";
  episodes: number;
  successes: number;
  protocol_errors?: number;
}

export type EnvRecord = HelloRecord | EpisodeRecord | ObsRecord | StepRecord | EndRecord;

export class LineFramer {
  private buf = "";

  /** Feed a chunk; returns the complete lines it closed. */
  push(chunk: Buffer | string): string[] {
    this.buf += chunk.toString();
    const parts = this.buf.split("\n");
    this.buf = parts.pop() ?? "";
    return parts.filter((l) => l.length > 0);
  }
}

export function parseRecord(line: string): EnvRecord {
  const rec = JSON.parse(line);
  if (typeof rec !== "object" || rec === null || typeof rec.type !== "string") {
    throw new Error(`malformed record: ${line.slice(0, 80)}`);
  }
  return rec as EnvRecord;
}

export function helloAck(curriculumSwitch?: number): string {
  const ack: Record<string, unknown> = {
    type: "hello_ack",
    version: PROTOCOL_VERSION,
  };
  if (curriculumSwitch !== undefined) ack.curriculum_switch = curriculumSwitch;
  return JSON.stringify(ack);
}

export function actByIndex(index: number): string {
  return JSON.stringify({ type: "act", index });
}

/** Observation vector layout shared by the networks: scan (normalized by
 * max range), target (distance normalized), mask flags. */
export const SCAN_DIM = 500;
export const TARGET_DIM = 5;
export const MASK_DIM = 42;
export const OBS_DIM = SCAN_DIM + TARGET_DIM + MASK_DIM;

export function obsToVector(rec: ObsRecord, maxRange = 8.0): Float32Array {
  const out = new Float32Array(OBS_DIM);
  for (let i = 0; i < SCAN_DIM; i++) out[i] = rec.scan[i] / maxRange;
  out[SCAN_DIM] = rec.target[0] / maxRange;
  for (let i = 1; i < TARGET_DIM; i++) out[SCAN_DIM + i] = rec.target[i];
  for (let i = 0; i < MASK_DIM; i++) out[SCAN_DIM + TARGET_DIM + i] = rec.mask[i];
  return out;
}

export function maskOf(vec: Float32Array): Float32Array {
  return vec.subarray(SCAN_DIM + TARGET_DIM, OBS_DIM) as Float32Array;
}
