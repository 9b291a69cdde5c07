// Wire types for the steering service WebSocket protocol.

export interface ReferencesMsg {
  leader: [number, number];
  r1: [number, number];
  r2: [number, number];
  origin: [number, number];
  ex: [number, number];
  ey: [number, number];
}

export interface RegionsMsg {
  steer_region: { apex_y: number; slope: number };
  pattern_region: { upper_slope: number; lower_slope: number; tail_y: number };
}

export interface StateMsg {
  type: "state";
  i: number;
  seq: number;
  positions: [number, number][];
  phase: string;
  frame: "common" | "global";
  references: ReferencesMsg | null;
  sec: { center: [number, number]; radius: number } | null;
  regions: RegionsMsg | null;
  pending_steer: [number, number] | null;
  margins: Record<string, number> | null;
  paused: boolean;
}

export interface AckMsg {
  type: "ack";
  cmd_id: number | string | null;
}

export interface RejectMsg {
  type: "reject";
  cmd_id: number | string | null;
  reason: string;
  detail?: unknown;
}

export type ServerMsg = StateMsg | AckMsg | RejectMsg;

export interface SteerCmd {
  type: "steer";
  target: [number, number];
  frame: "common" | "global";
  cmd_id: number;
}

export interface FaultCmd {
  type: "inject_fault";
  role: "R1" | "R2" | "Leader" | number;
  cmd_id: number;
}

export type ClientCmd =
  | SteerCmd
  | FaultCmd
  | { type: "pause"; cmd_id?: number }
  | { type: "resume"; cmd_id?: number }
  | { type: "set_speed"; eps: number; cmd_id?: number };

export function parseServerMsg(raw: string): ServerMsg | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const t = (data as { type?: unknown }).type;
  if (t === "state" || t === "ack" || t === "reject") {
    return data as ServerMsg;
  }
  return null;
}
