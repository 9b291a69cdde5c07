import { describe, expect, it } from "vitest";
import {
  PHASE_TIMELINE_CAP,
  applyServerMsg,
  initialView,
  onClick,
  screenToWorld,
  worldToScreen,
} from "../src/view.js";
import { formedState } from "./helpers.js";

function viewWithState(state = formedState()) {
  let view = initialView(800, 600);
  view = { ...view, connection: "open" as const };
  view = applyServerMsg(view, state);
  // center the camera on the scene so screen math is easy
  view = { ...view, camera: { ...view.camera, centerX: 0, centerY: 0, scale: 100 } };
  return view;
}

describe("camera transforms", () => {
  it("round-trips world coordinates", () => {
    const view = viewWithState();
    const p = { x: 0.35, y: -0.62 };
    const back = screenToWorld(worldToScreen(p, view.camera), view.camera);
    expect(back.x).toBeCloseTo(p.x, 10);
    expect(back.y).toBeCloseTo(p.y, 10);
  });
});

describe("reducers", () => {
  it("keeps a capped phase timeline without repeats", () => {
    let view = initialView(800, 600);
    for (let i = 0; i < PHASE_TIMELINE_CAP + 50; i++) {
      view = applyServerMsg(view, formedState({ phase: `P${i}`, seq: i }));
      view = applyServerMsg(view, formedState({ phase: `P${i}`, seq: i }));
    }
    expect(view.phaseTimeline.length).toBe(PHASE_TIMELINE_CAP);
    expect(view.phaseTimeline[view.phaseTimeline.length - 1]).toBe("P249");
  });

  it("tracks ack and reject for the pending click", () => {
    let view = viewWithState();
    const outcome = onClick(view, worldToScreen({ x: 0.1, y: 1.5 }, view.camera));
    expect(outcome.send).not.toBeNull();
    view = outcome.view;
    view = applyServerMsg(view, { type: "ack", cmd_id: outcome.send!.cmd_id });
    expect(view.pendingClick?.status).toBe("acked");
    // a later state with no pending steer clears the marker
    view = applyServerMsg(view, formedState({ seq: 8, pending_steer: null }));
    expect(view.pendingClick).toBeNull();
  });

  it("surfaces rejects as a toast", () => {
    let view = viewWithState();
    const outcome = onClick(view, worldToScreen({ x: 0.1, y: 1.5 }, view.camera));
    view = outcome.view;
    view = applyServerMsg(view, {
      type: "reject",
      cmd_id: outcome.send!.cmd_id,
      reason: "outside-steer-region",
    });
    expect(view.pendingClick?.status).toBe("rejected");
    expect(view.toast).toContain("outside-steer-region");
  });
});

describe("click gating", () => {
  it("sends a steer for clicks inside the cone", () => {
    const view = viewWithState();
    const { send } = onClick(view, worldToScreen({ x: 0.2, y: 1.6 }, view.camera));
    expect(send).not.toBeNull();
    expect(send!.frame).toBe("common");
    // common frame here equals global (identity references)
    expect(send!.target[0]).toBeCloseTo(0.2, 6);
    expect(send!.target[1]).toBeCloseTo(1.6, 6);
  });

  it("drops clicks inside the pattern wedge without sending", () => {
    const view = viewWithState();
    const { send, view: v2 } = onClick(
      view,
      worldToScreen({ x: 0, y: -0.5 }, view.camera),
    );
    expect(send).toBeNull();
    expect(v2.toast).toContain("outside the steer region");
  });

  it("drops clicks during recovery with an explanation", () => {
    const view = viewWithState(formedState({ phase: "Recovery" }));
    const { send, view: v2 } = onClick(
      view,
      worldToScreen({ x: 0.1, y: 1.5 }, view.camera),
    );
    expect(send).toBeNull();
    expect(v2.toast).toContain("Recovery");
  });

  it("drops clicks while disconnected", () => {
    let view = viewWithState();
    view = { ...view, connection: "closed" as const };
    const { send, view: v2 } = onClick(
      view,
      worldToScreen({ x: 0.1, y: 1.5 }, view.camera),
    );
    expect(send).toBeNull();
    expect(v2.toast).toContain("disconnected");
  });
});
