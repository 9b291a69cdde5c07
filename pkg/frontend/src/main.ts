// Page bootstrap: connect, render on every message, forward gestures.

import { connect } from "./client.js";
import { render } from "./render.js";
import { applyServerMsg, fitCamera, initialView, onClick } from "./view.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const urlInput = document.getElementById("url") as HTMLInputElement;
const faultButton = document.getElementById("fault") as HTMLButtonElement;
const pauseButton = document.getElementById("pause") as HTMLButtonElement;

let view = initialView(canvas.width, canvas.height);
let client = connect(urlInput.value);
let paused = false;
let framesSinceFit = 0;

function wire() {
  client.onOpen = () => {
    view = { ...view, connection: "open" };
  };
  client.onClose = () => {
    view = { ...view, connection: "closed", toast: "disconnected" };
    render(ctx, view);
  };
  client.onMessage = (msg) => {
    view = applyServerMsg(view, msg);
    if (msg.type === "state" && framesSinceFit++ % 50 === 0) {
      view = fitCamera(view);
    }
    render(ctx, view);
  };
}
wire();

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const outcome = onClick(view, {
    x: ev.clientX - rect.left,
    y: ev.clientY - rect.top,
  });
  view = outcome.view;
  if (outcome.send) {
    client.send(outcome.send);
  }
  render(ctx, view);
});

faultButton.addEventListener("click", () => {
  client.send({ type: "inject_fault", role: "R1", cmd_id: view.nextCmdId });
  view = { ...view, nextCmdId: view.nextCmdId + 1 };
});

pauseButton.addEventListener("click", () => {
  paused = !paused;
  client.send(paused ? { type: "pause" } : { type: "resume" });
  pauseButton.textContent = paused ? "resume" : "pause";
});

document.getElementById("reconnect")!.addEventListener("click", () => {
  client.close();
  client = connect(urlInput.value);
  view = initialView(canvas.width, canvas.height);
  wire();
});
