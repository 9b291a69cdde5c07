// View state and reducers: pure functions from incoming messages and user
// gestures to the next state; rendering reads, never writes.

import type { ServerMsg, StateMsg } from "./protocol.js";
import { clickInsideSteerRegion, toCommon, type Vec } from "./region.js";

export interface Camera {
  // world units -> screen pixels: screen = (world - center) * scale + half
  centerX: number;
  centerY: number;
  scale: number;
  width: number;
  height: number;
}

export interface PendingClick {
  target: [number, number]; // common frame
  cmdId: number;
  status: "sent" | "acked" | "rejected";
  reason?: string;
}

export interface ViewState {
  latest: StateMsg | null;
  camera: Camera;
  pendingClick: PendingClick | null;
  connection: "connecting" | "open" | "closed";
  phaseTimeline: string[]; // most recent last, capped
  toast: string | null;
  nextCmdId: number;
}

export const PHASE_TIMELINE_CAP = 200;

export function initialView(width: number, height: number): ViewState {
  return {
    latest: null,
    camera: { centerX: 0, centerY: 0, scale: 40, width, height },
    pendingClick: null,
    connection: "connecting",
    phaseTimeline: [],
    toast: null,
    nextCmdId: 1,
  };
}

export function worldToScreen(p: Vec, cam: Camera): Vec {
  return {
    x: (p.x - cam.centerX) * cam.scale + cam.width / 2,
    y: cam.height / 2 - (p.y - cam.centerY) * cam.scale,
  };
}

export function screenToWorld(p: Vec, cam: Camera): Vec {
  return {
    x: (p.x - cam.width / 2) / cam.scale + cam.centerX,
    y: (cam.height / 2 - p.y) / cam.scale + cam.centerY,
  };
}

export function applyServerMsg(view: ViewState, msg: ServerMsg): ViewState {
  if (msg.type === "state") {
    const timeline =
      msg.phase && msg.phase !== view.phaseTimeline[view.phaseTimeline.length - 1]
        ? [...view.phaseTimeline, msg.phase].slice(-PHASE_TIMELINE_CAP)
        : view.phaseTimeline;
    let pending = view.pendingClick;
    // a consumed steer clears the marker
    if (pending && pending.status === "acked" && msg.pending_steer === null) {
      pending = null;
    }
    return { ...view, latest: msg, phaseTimeline: timeline, pendingClick: pending };
  }
  if (msg.type === "ack") {
    if (view.pendingClick && view.pendingClick.cmdId === msg.cmd_id) {
      return {
        ...view,
        pendingClick: { ...view.pendingClick, status: "acked" },
        toast: null,
      };
    }
    return view;
  }
  // reject
  if (view.pendingClick && view.pendingClick.cmdId === msg.cmd_id) {
    return {
      ...view,
      pendingClick: { ...view.pendingClick, status: "rejected", reason: msg.reason },
      toast: `rejected: ${msg.reason}`,
    };
  }
  return { ...view, toast: `rejected: ${msg.reason}` };
}

export interface ClickOutcome {
  view: ViewState;
  send: { type: "steer"; target: [number, number]; frame: "common"; cmd_id: number } | null;
}

/**
 * A click on the canvas: transform to the shared frame and produce a steer
 * only when the local region test passes and the flock is steerable.
 */
export function onClick(view: ViewState, screen: Vec): ClickOutcome {
  const st = view.latest;
  if (!st) return { view, send: null };
  if (view.connection !== "open") {
    return { view: { ...view, toast: "disconnected: click dropped" }, send: null };
  }
  if (st.phase !== "FlockMotion") {
    return {
      view: { ...view, toast: `not steerable during ${st.phase}` },
      send: null,
    };
  }
  if (!st.references || !st.regions || !st.sec) {
    return { view: { ...view, toast: "no references yet" }, send: null };
  }
  const world = screenToWorld(screen, view.camera);
  if (!clickInsideSteerRegion(world, st)) {
    return {
      view: { ...view, toast: "outside the steer region" },
      send: null,
    };
  }
  const common = toCommon(world, st.references);
  const cmdId = view.nextCmdId;
  const send = {
    type: "steer" as const,
    target: [common.x, common.y] as [number, number],
    frame: "common" as const,
    cmd_id: cmdId,
  };
  return {
    view: {
      ...view,
      nextCmdId: cmdId + 1,
      toast: null,
      pendingClick: { target: send.target, cmdId, status: "sent" },
    },
    send,
  };
}

export function fitCamera(view: ViewState): ViewState {
  const st = view.latest;
  if (!st || st.positions.length === 0) return view;
  const xs = st.positions.map((p) => p[0]);
  const ys = st.positions.map((p) => p[1]);
  let minX = Math.min(...xs);
  let maxX = Math.max(...xs);
  let minY = Math.min(...ys);
  let maxY = Math.max(...ys);
  if (st.sec) {
    minX = Math.min(minX, st.sec.center[0] - st.sec.radius);
    maxX = Math.max(maxX, st.sec.center[0] + st.sec.radius);
    minY = Math.min(minY, st.sec.center[1] - st.sec.radius * 2.2);
    maxY = Math.max(maxY, st.sec.center[1] + st.sec.radius * 2.2);
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const cam = view.camera;
  const scale = 0.85 * Math.min(cam.width / spanX, cam.height / spanY);
  return {
    ...view,
    camera: {
      ...cam,
      centerX: (minX + maxX) / 2,
      centerY: (minY + maxY) / 2,
      scale,
    },
  };
}
