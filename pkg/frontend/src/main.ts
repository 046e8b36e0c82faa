import { SessionApi } from "./api.js";
import { AxisGizmo } from "./gizmo.js";
import { ControlPanel } from "./panel.js";
import { ExplorerState } from "./state.js";
import { MeshViewer } from "./viewer.js";

const params = new URLSearchParams(window.location.search);
const serviceUrl = params.get("service") ?? "http://127.0.0.1:8080";

const api = new SessionApi(serviceUrl);
const state = new ExplorerState(api);
const canvas = document.getElementById("viewport") as HTMLCanvasElement;
const viewer = new MeshViewer(canvas, state);
const gizmo = new AxisGizmo(viewer, state);
const panel = new ControlPanel(document.getElementById("panel")!, state);

// click to select: local pick for latency, reconciled against the service's
// reference pick so both always agree on vertex ids
let downAt: [number, number] | null = null;
canvas.addEventListener("pointerdown", (event) => {
  downAt = [event.clientX, event.clientY];
});
canvas.addEventListener("pointerup", (event) => {
  if (!downAt || gizmo.isDragging) return;
  const moved = Math.hypot(event.clientX - downAt[0], event.clientY - downAt[1]);
  downAt = null;
  if (moved > 4 || state.sessionId === null) return; // that was a camera drag
  const { origin, direction } = viewer.rayFromPointer(event);
  const local = state.pickLocal(origin, direction);
  state.select(local);
  void api
    .pick(state.sessionId, origin, direction)
    .then((remote) => {
      if (remote !== local) state.select(remote);
    })
    .catch(() => undefined);
});

void api.health().then((ok) => {
  if (!ok) panel.toast(`service at ${serviceUrl} is not answering`);
});

export { api, state, viewer, gizmo, panel };
