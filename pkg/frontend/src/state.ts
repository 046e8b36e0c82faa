/** UI session state: mirrors the service, never computes model math.
 *
 * Every displayed quantity (positions, coefficients, observations)
 * originates from a service response. Mutations are serialized: at most one
 * in-flight mutating request, matching the service's single-writer contract.
 * Mesh payloads carry a version; anything older than what is already applied
 * is discarded. */

import type {
  MeshJson,
  ObservationDto,
  SessionClient,
  SessionDescriptor,
  StatePayload,
  Vec3,
} from "./api.js";
import { pickVertex } from "./picking.js";

export interface StagedMove {
  vertexId: number;
  /** position the vertex had when the drag started (rendered red) */
  original: Vec3;
  /** current drag target (rendered green) */
  target: Vec3;
}

export type ExplorerEvent =
  | "session"
  | "mesh"
  | "alpha"
  | "observations"
  | "selection"
  | "staged"
  | "busy"
  | "notice";

export type Listener = (event: ExplorerEvent) => void;

export class BusyError extends Error {
  constructor() {
    super("another request is still in flight");
    this.name = "BusyError";
  }
}

export class ExplorerState {
  sessionId: string | null = null;
  descriptor: SessionDescriptor | null = null;
  /** slider values mirror these coefficients (one slider per component) */
  alpha: number[] = [];
  meshVersion = 0;
  positions: Float64Array | null = null;
  triangles: Int32Array = new Int32Array(0);
  observations: ObservationDto[] = [];
  selectedVertex: number | null = null;
  staged: StagedMove | null = null;
  busy = false;
  lastNotice: string | null = null;

  private listeners: Listener[] = [];

  constructor(private readonly api: SessionClient) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private emit(event: ExplorerEvent): void {
    for (const listener of this.listeners) listener(event);
  }

  /** Gizmo anchor; present exactly when a vertex is selected. */
  get gizmoPosition(): Vec3 | null {
    if (this.selectedVertex === null || this.positions === null) return null;
    return this.vertexPosition(this.selectedVertex);
  }

  get componentCount(): number {
    return this.descriptor ? this.descriptor.m_components : 0;
  }

  vertexPosition(vertexId: number): Vec3 {
    if (this.positions === null) throw new Error("no mesh loaded");
    return [
      this.positions[3 * vertexId],
      this.positions[3 * vertexId + 1],
      this.positions[3 * vertexId + 2],
    ];
  }

  /** Map a slider display value (model units, range +-3 sigma) to alpha. */
  displayToAlpha(component: number, display: number): number {
    const sigma = Math.sqrt(this.descriptor!.variances[component]);
    return sigma > 0 ? display / sigma : 0;
  }

  alphaToDisplay(component: number, alpha: number): number {
    return alpha * Math.sqrt(this.descriptor!.variances[component]);
  }

  sliderRange(component: number): number {
    return 3 * Math.sqrt(this.descriptor!.variances[component]);
  }

  // --- response ingestion ---------------------------------------------------

  private ingestMesh(mesh: MeshJson): void {
    if (mesh.mesh_version < this.meshVersion) return; // stale response, discard
    this.meshVersion = mesh.mesh_version;
    this.positions = Float64Array.from(mesh.positions);
    this.emit("mesh");
  }

  private ingestState(payload: StatePayload): void {
    if (payload.mesh_version >= this.meshVersion) {
      this.meshVersion = payload.mesh_version;
      this.alpha = payload.alpha.slice();
      this.emit("alpha");
    }
  }

  private async refreshMesh(): Promise<void> {
    this.ingestMesh(await this.api.getMeshJson(this.requireSession()));
  }

  private async refreshObservations(): Promise<void> {
    this.observations = await this.api.listObservations(this.requireSession());
    this.emit("observations");
  }

  private requireSession(): string {
    if (this.sessionId === null) throw new Error("no session loaded");
    return this.sessionId;
  }

  /** Serialize mutations: reject when one is already in flight. */
  private async mutate<T>(run: () => Promise<T>): Promise<T> {
    if (this.busy) throw new BusyError();
    this.busy = true;
    this.emit("busy");
    try {
      return await run();
    } finally {
      this.busy = false;
      this.emit("busy");
    }
  }

  // --- session lifecycle ----------------------------------------------------

  async loadModel(model: Uint8Array | Blob, rcond?: number): Promise<SessionDescriptor> {
    return this.mutate(async () => {
      const previous = this.sessionId;
      const descriptor = await this.api.createSession(model, rcond);
      if (previous !== null) {
        // the caller confirmed the replacement; drop the old session
        await this.api.deleteSession(previous).catch(() => undefined);
      }
      this.sessionId = descriptor.session_id;
      this.descriptor = descriptor;
      this.alpha = descriptor.alpha.slice();
      this.meshVersion = 0;
      this.observations = [];
      this.selectedVertex = null;
      this.staged = null;
      const full = await this.api.getSession(descriptor.session_id);
      this.triangles = Int32Array.from((full.triangulation ?? []).flat());
      this.emit("session");
      this.ingestMesh(await this.api.getMeshJson(descriptor.session_id));
      this.emit("observations");
      this.emit("alpha");
      this.emit("selection");
      return descriptor;
    });
  }

  // --- coefficients ----------------------------------------------------------

  async setSlider(component: number, display: number): Promise<void> {
    const value = this.displayToAlpha(component, display);
    await this.mutate(async () => {
      this.ingestState(await this.api.updateCoefficient(this.requireSession(), component, value));
      await this.refreshMesh();
    });
  }

  async resetToMean(): Promise<void> {
    await this.mutate(async () => {
      const zeros = new Array(this.componentCount).fill(0);
      this.ingestState(await this.api.setCoefficients(this.requireSession(), zeros));
      await this.refreshMesh();
    });
  }

  async randomize(seed?: number): Promise<void> {
    await this.mutate(async () => {
      this.ingestState(await this.api.randomize(this.requireSession(), seed));
      await this.refreshMesh();
    });
  }

  // --- selection and gizmo staging -------------------------------------------

  select(vertexId: number | null): void {
    this.selectedVertex = vertexId;
    if (vertexId === null) this.staged = null; // miss clears any pending drag
    this.emit("selection");
    this.emit("staged");
  }

  beginDrag(): StagedMove {
    if (this.selectedVertex === null) throw new Error("no vertex selected");
    const original = this.vertexPosition(this.selectedVertex);
    this.staged = {
      vertexId: this.selectedVertex,
      original,
      target: [...original] as Vec3,
    };
    this.emit("staged");
    return this.staged;
  }

  dragTo(target: Vec3): void {
    if (this.staged === null) throw new Error("no drag in progress");
    this.staged = { ...this.staged, target: [...target] as Vec3 };
    this.emit("staged");
  }

  /** Drop the pending drag; nothing is sent to the service. */
  cancelDrag(): void {
    this.staged = null;
    this.emit("staged");
  }

  async confirmDrag(): Promise<void> {
    const staged = this.staged;
    if (staged === null) throw new Error("no drag in progress");
    await this.mutate(async () => {
      const id = this.requireSession();
      if (this.observations.some((o) => o.vertex_id === staged.vertexId)) {
        // service enforces unique vertex ids: replace means delete + put
        await this.api.deleteObservation(id, staged.vertexId);
      }
      const payload = await this.api.putObservation(id, staged.vertexId, "moved", staged.target);
      this.ingestState(payload);
      this.staged = null;
      this.emit("staged");
      await this.refreshObservations();
    });
  }

  async pinSelected(): Promise<void> {
    if (this.selectedVertex === null) throw new Error("no vertex selected");
    const vertexId = this.selectedVertex;
    await this.mutate(async () => {
      const id = this.requireSession();
      if (this.observations.some((o) => o.vertex_id === vertexId)) {
        await this.api.deleteObservation(id, vertexId);
      }
      this.ingestState(await this.api.putObservation(id, vertexId, "pinned"));
      await this.refreshObservations();
    });
  }

  async removeObservation(vertexId: number): Promise<void> {
    await this.mutate(async () => {
      this.ingestState(await this.api.deleteObservation(this.requireSession(), vertexId));
      await this.refreshObservations();
    });
  }

  async clearObservations(): Promise<void> {
    await this.mutate(async () => {
      this.ingestState(await this.api.clearObservations(this.requireSession()));
      await this.refreshObservations();
    });
  }

  // --- posterior / undo / export ----------------------------------------------

  async computePosterior(): Promise<boolean> {
    return this.mutate(async () => {
      const id = this.requireSession();
      const outcome = await this.api.computePosterior(id);
      let payload: StatePayload;
      if (outcome.kind === "sync") {
        payload = outcome.payload;
      } else {
        // long-poll the background job until it settles
        for (;;) {
          const status = await this.api.pollPosterior(id, outcome.jobId, 1000);
          if (status.status === "done") {
            payload = status.result!;
            break;
          }
          if (status.status === "cancelled") return false;
          if (status.status === "error") throw new Error(status.error ?? "posterior failed");
        }
      }
      if (payload.changed === false) {
        this.lastNotice = payload.notice ?? "no observations; shape unchanged";
        this.emit("notice");
        return false;
      }
      this.ingestState(payload);
      await this.refreshMesh();
      return true;
    });
  }

  async undo(): Promise<boolean> {
    return this.mutate(async () => {
      const payload = await this.api.undo(this.requireSession());
      this.ingestState(payload);
      if (payload.observations) {
        this.observations = payload.observations;
        this.emit("observations");
      }
      await this.refreshMesh();
      if (!payload.undone) {
        this.lastNotice = "nothing to undo";
        this.emit("notice");
      }
      return payload.undone === true;
    });
  }

  async exportPly(format: "ply_ascii" | "ply_binary"): Promise<Uint8Array> {
    return this.api.getMeshPly(this.requireSession(), format);
  }

  /** Local pick; the service's pick endpoint is the reference it must match. */
  pickLocal(origin: Vec3, direction: Vec3): number | null {
    if (this.positions === null) return null;
    return pickVertex({ positions: this.positions, triangles: this.triangles }, origin, direction);
  }
}
