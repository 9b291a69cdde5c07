import type { StateMsg } from "../src/protocol.js";

export function formedState(overrides: Partial<StateMsg> = {}): StateMsg {
  return {
    type: "state",
    i: 100,
    seq: 7,
    positions: [
      [0, 1],
      [0, -1],
      [0, 0],
      [0.1, -0.7],
      [-0.1, -0.72],
    ],
    phase: "FlockMotion",
    frame: "common",
    references: {
      leader: [0, 0],
      r1: [0, 1],
      r2: [0, -1],
      origin: [0, 0],
      ex: [1, 0],
      ey: [0, 1],
    },
    sec: { center: [0, 0], radius: 1 },
    regions: {
      steer_region: { apex_y: 1, slope: 1 },
      pattern_region: { upper_slope: 1.5, lower_slope: 1.5, tail_y: -1 },
    },
    pending_steer: null,
    margins: { inside_circle: 0.1, tail_side: 0.5, leader_disc: 0.4 },
    paused: false,
    ...overrides,
  };
}
