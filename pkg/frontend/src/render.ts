// Immediate-mode canvas rendering of the latest state; a pure function of
// the view state, called at the message rate with no interpolation.

import type { StateMsg } from "./protocol.js";
import { fromCommon, type Vec } from "./region.js";
import { worldToScreen, type ViewState } from "./view.js";

const COLORS = {
  robot: "#274060",
  head: "#1b8a5a",
  tail: "#c0392b",
  leader: "#8e44ad",
  circle: "#9aa7b5",
  steerRegion: "rgba(27, 138, 90, 0.15)",
  steerBorder: "#1b8a5a",
  patternRegion: "rgba(230, 126, 34, 0.12)",
  patternBorder: "#e67e22",
  pending: "#f1c40f",
};

export function render(ctx: CanvasRenderingContext2D, view: ViewState): void {
  const cam = view.camera;
  ctx.clearRect(0, 0, cam.width, cam.height);
  const st = view.latest;
  if (!st) {
    banner(ctx, view, "waiting for state…");
    return;
  }

  if (st.sec) {
    const c = worldToScreen({ x: st.sec.center[0], y: st.sec.center[1] }, cam);
    ctx.beginPath();
    ctx.strokeStyle = COLORS.circle;
    ctx.setLineDash([4, 4]);
    ctx.arc(c.x, c.y, st.sec.radius * cam.scale, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  if (st.references && st.regions && st.sec) {
    drawSteerRegion(ctx, view, st);
    drawPatternRegion(ctx, view, st);
  }

  for (const [x, y] of st.positions) {
    drawDot(ctx, view, { x, y }, COLORS.robot, 4);
  }
  if (st.references) {
    drawDot(ctx, view, vec(st.references.r1), COLORS.head, 6);
    drawDot(ctx, view, vec(st.references.r2), COLORS.tail, 6);
    drawDot(ctx, view, vec(st.references.leader), COLORS.leader, 5);
  }
  if (st.pending_steer) {
    drawMarker(ctx, view, vec(st.pending_steer), COLORS.pending);
  } else if (view.pendingClick && st.references) {
    const g = fromCommon(
      { x: view.pendingClick.target[0], y: view.pendingClick.target[1] },
      st.references,
    );
    const color = view.pendingClick.status === "rejected" ? COLORS.tail : COLORS.pending;
    drawMarker(ctx, view, g, color);
  }

  banner(ctx, view, `${st.phase}${st.paused ? " (paused)" : ""}`
    + (view.toast ? ` — ${view.toast}` : ""));
}

function vec(p: [number, number]): Vec {
  return { x: p[0], y: p[1] };
}

function drawDot(ctx: CanvasRenderingContext2D, view: ViewState, p: Vec,
                 color: string, r: number): void {
  const s = worldToScreen(p, view.camera);
  ctx.beginPath();
  ctx.fillStyle = color;
  ctx.arc(s.x, s.y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function drawMarker(ctx: CanvasRenderingContext2D, view: ViewState, p: Vec,
                    color: string): void {
  const s = worldToScreen(p, view.camera);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(s.x - 6, s.y);
  ctx.lineTo(s.x + 6, s.y);
  ctx.moveTo(s.x, s.y - 6);
  ctx.lineTo(s.x, s.y + 6);
  ctx.stroke();
  ctx.lineWidth = 1;
}

function drawSteerRegion(ctx: CanvasRenderingContext2D, view: ViewState,
                         st: StateMsg): void {
  const refs = st.references!;
  const slope = st.regions!.steer_region.slope;
  const r = st.sec!.radius;
  const span = 2.5 * r;
  // border polyline in the shared frame, then into screen space
  const pts: Vec[] = [];
  for (let i = 0; i <= 40; i++) {
    const x = -span + (2 * span * i) / 40;
    pts.push({ x, y: slope * Math.abs(x) + r });
  }
  ctx.beginPath();
  const first = worldToScreen(fromCommon(pts[0], refs), view.camera);
  ctx.moveTo(first.x, first.y);
  for (const p of pts.slice(1)) {
    const s = worldToScreen(fromCommon(p, refs), view.camera);
    ctx.lineTo(s.x, s.y);
  }
  // close upward to shade the clickable cone
  const topRight = worldToScreen(fromCommon({ x: span, y: slope * span + r + span }, refs), view.camera);
  const topLeft = worldToScreen(fromCommon({ x: -span, y: slope * span + r + span }, refs), view.camera);
  ctx.lineTo(topRight.x, topRight.y);
  ctx.lineTo(topLeft.x, topLeft.y);
  ctx.closePath();
  ctx.fillStyle = COLORS.steerRegion;
  ctx.fill();
  ctx.strokeStyle = COLORS.steerBorder;
  ctx.stroke();
}

function drawPatternRegion(ctx: CanvasRenderingContext2D, view: ViewState,
                           st: StateMsg): void {
  const refs = st.references!;
  const { upper_slope, lower_slope, tail_y } = st.regions!.pattern_region;
  const cornerX = -tail_y / (upper_slope + lower_slope);
  const poly: Vec[] = [
    { x: 0, y: 0 },
    { x: cornerX, y: -upper_slope * cornerX },
    { x: 0, y: tail_y },
    { x: -cornerX, y: -upper_slope * cornerX },
  ];
  ctx.beginPath();
  const first = worldToScreen(fromCommon(poly[0], refs), view.camera);
  ctx.moveTo(first.x, first.y);
  for (const p of poly.slice(1)) {
    const s = worldToScreen(fromCommon(p, refs), view.camera);
    ctx.lineTo(s.x, s.y);
  }
  ctx.closePath();
  ctx.fillStyle = COLORS.patternRegion;
  ctx.fill();
  ctx.strokeStyle = COLORS.patternBorder;
  ctx.stroke();
}

function banner(ctx: CanvasRenderingContext2D, view: ViewState, text: string): void {
  ctx.fillStyle = "#202833";
  ctx.font = "14px system-ui, sans-serif";
  ctx.fillText(text, 12, 20);
}
