// Client-side mirror of the server's steer-region test, used only to
// pre-validate clicks before sending; the server remains the authority.

import type { ReferencesMsg, StateMsg } from "./protocol.js";

export interface Vec {
  x: number;
  y: number;
}

const EPS = 1e-9;

/** Coordinates of a global point in the shared frame carried by a state. */
export function toCommon(p: Vec, refs: ReferencesMsg): Vec {
  const dx = p.x - refs.origin[0];
  const dy = p.y - refs.origin[1];
  return {
    x: dx * refs.ex[0] + dy * refs.ex[1],
    y: dx * refs.ey[0] + dy * refs.ey[1],
  };
}

export function fromCommon(p: Vec, refs: ReferencesMsg): Vec {
  return {
    x: refs.origin[0] + p.x * refs.ex[0] + p.y * refs.ey[0],
    y: refs.origin[1] + p.x * refs.ex[1] + p.y * refs.ey[1],
  };
}

/** Membership in the head's cone, boundary inclusive, global input. */
export function steerRegionContains(
  p: Vec,
  slope: number,
  refs: ReferencesMsg,
  radius: number,
): boolean {
  const dx = p.x - refs.origin[0];
  const dy = p.y - refs.origin[1];
  const y = dx * refs.ey[0] + dy * refs.ey[1];
  const x = Math.abs(-dx * refs.ey[1] + dy * refs.ey[0]);
  const scale = Math.max(radius, 1.0);
  return y >= slope * x + radius - EPS * scale;
}

/** The same test driven directly from a state message. */
export function clickInsideSteerRegion(p: Vec, state: StateMsg): boolean {
  if (!state.references || !state.regions || !state.sec) return false;
  return steerRegionContains(
    p,
    state.regions.steer_region.slope,
    state.references,
    state.sec.radius,
  );
}
