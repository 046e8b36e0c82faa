/** Typed client for the shape-model session service (HTTP+JSON). */

export type Vec3 = [number, number, number];
export type ObservationKind = "moved" | "pinned";

export interface ObservationDto {
  vertex_id: number;
  target: Vec3;
  kind: ObservationKind;
}

export interface SessionDescriptor {
  session_id: string;
  n_vertices: number;
  m_components: number;
  variances: number[];
  noise_variance: number;
  rcond: number;
  mesh_version: number;
  alpha: number[];
  observation_count: number;
  triangulation_fingerprint: string;
  metadata: Record<string, string>;
  triangulation?: number[][];
}

export interface StatePayload {
  session_id: string;
  mesh_version: number;
  alpha: number[];
  seed?: number;
  changed?: boolean;
  notice?: string;
  undone?: boolean;
  observations?: ObservationDto[];
  observation?: ObservationDto;
}

export interface MeshJson {
  mesh_version: number;
  positions: number[];
  triangulation_fingerprint: string;
}

export type PosteriorOutcome =
  | { kind: "sync"; payload: StatePayload }
  | { kind: "job"; jobId: string };

export interface JobStatus {
  job_id: string;
  status: "running" | "done" | "cancelled" | "error";
  result?: StatePayload;
  error?: string;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(typeof detail === "string" ? detail : JSON.stringify(detail));
    this.name = "ApiError";
  }

  /** Validator violations from a rejected model upload, when present. */
  get violations(): string[] {
    const d = this.detail as { violations?: string[] } | null;
    return d && Array.isArray(d.violations) ? d.violations : [];
  }
}

async function parseError(response: Response): Promise<never> {
  let detail: unknown = response.statusText;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (body && body.detail !== undefined) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, detail);
}

/** What the UI needs from the service; SessionApi is the HTTP implementation. */
export interface SessionClient {
  health(): Promise<boolean>;
  createSession(model: Uint8Array | Blob, rcond?: number): Promise<SessionDescriptor>;
  getSession(id: string): Promise<SessionDescriptor>;
  deleteSession(id: string): Promise<void>;
  setCoefficients(id: string, alpha: number[]): Promise<StatePayload>;
  updateCoefficient(id: string, index: number, value: number): Promise<StatePayload>;
  randomize(id: string, seed?: number): Promise<StatePayload>;
  listObservations(id: string): Promise<ObservationDto[]>;
  putObservation(
    id: string,
    vertexId: number,
    kind: ObservationKind,
    target?: Vec3,
  ): Promise<StatePayload>;
  deleteObservation(id: string, vertexId: number): Promise<StatePayload>;
  clearObservations(id: string): Promise<StatePayload>;
  computePosterior(id: string): Promise<PosteriorOutcome>;
  pollPosterior(id: string, jobId: string, waitMs?: number): Promise<JobStatus>;
  getMeshJson(id: string): Promise<MeshJson>;
  getMeshPly(id: string, format: "ply_ascii" | "ply_binary"): Promise<Uint8Array>;
  undo(id: string): Promise<StatePayload>;
  pick(id: string, origin: Vec3, direction: Vec3): Promise<number | null>;
}

export class SessionApi implements SessionClient {
  constructor(public readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.url(path), init);
    if (!response.ok) await parseError(response);
    return (await response.json()) as T;
  }

  private jsonBody(body: unknown): RequestInit {
    return {
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    };
  }

  async health(): Promise<boolean> {
    const response = await fetch(this.url("/health"));
    return response.ok;
  }

  async createSession(model: Uint8Array | Blob, rcond?: number): Promise<SessionDescriptor> {
    const form = new FormData();
    const blob = model instanceof Blob ? model : new Blob([model as BlobPart]);
    form.append("model", blob, "model.h5");
    const query = rcond !== undefined ? `?rcond=${rcond}` : "";
    return this.json(`/sessions${query}`, { method: "POST", body: form });
  }

  async getSession(id: string): Promise<SessionDescriptor> {
    return this.json(`/sessions/${id}`);
  }

  async deleteSession(id: string): Promise<void> {
    await this.json(`/sessions/${id}`, { method: "DELETE" });
  }

  async setCoefficients(id: string, alpha: number[]): Promise<StatePayload> {
    return this.json(`/sessions/${id}/coefficients`, {
      method: "PUT",
      ...this.jsonBody({ alpha }),
    });
  }

  async updateCoefficient(id: string, index: number, value: number): Promise<StatePayload> {
    return this.json(`/sessions/${id}/coefficients`, {
      method: "PUT",
      ...this.jsonBody({ updates: { [index]: value } }),
    });
  }

  async randomize(id: string, seed?: number): Promise<StatePayload> {
    return this.json(`/sessions/${id}/randomize`, {
      method: "POST",
      ...this.jsonBody(seed === undefined ? {} : { seed }),
    });
  }

  async listObservations(id: string): Promise<ObservationDto[]> {
    const body = await this.json<{ observations: ObservationDto[] }>(
      `/sessions/${id}/observations`,
    );
    return body.observations;
  }

  async putObservation(
    id: string,
    vertexId: number,
    kind: ObservationKind,
    target?: Vec3,
  ): Promise<StatePayload> {
    return this.json(`/sessions/${id}/observations/${vertexId}`, {
      method: "PUT",
      ...this.jsonBody(target === undefined ? { kind } : { kind, target }),
    });
  }

  async deleteObservation(id: string, vertexId: number): Promise<StatePayload> {
    return this.json(`/sessions/${id}/observations/${vertexId}`, { method: "DELETE" });
  }

  async clearObservations(id: string): Promise<StatePayload> {
    return this.json(`/sessions/${id}/observations`, { method: "DELETE" });
  }

  async replaceObservations(
    id: string,
    observations: Array<{ vertex_id: number; kind: ObservationKind; target?: Vec3 }>,
    rcond?: number,
  ): Promise<StatePayload> {
    return this.json(`/sessions/${id}/observations`, {
      method: "PUT",
      ...this.jsonBody({ observations, rcond }),
    });
  }

  async computePosterior(id: string): Promise<PosteriorOutcome> {
    const response = await fetch(this.url(`/sessions/${id}/posterior`), { method: "POST" });
    if (!response.ok) await parseError(response);
    if (response.status === 202) {
      const body = (await response.json()) as { job_id: string };
      return { kind: "job", jobId: body.job_id };
    }
    return { kind: "sync", payload: (await response.json()) as StatePayload };
  }

  async pollPosterior(id: string, jobId: string, waitMs = 1000): Promise<JobStatus> {
    return this.json(`/sessions/${id}/posterior/jobs/${jobId}?wait_ms=${waitMs}`);
  }

  async cancelPosterior(id: string, jobId: string): Promise<JobStatus> {
    return this.json(`/sessions/${id}/posterior/jobs/${jobId}`, { method: "DELETE" });
  }

  async getMeshJson(id: string): Promise<MeshJson> {
    return this.json(`/sessions/${id}/mesh?format=json`);
  }

  async getMeshPly(id: string, format: "ply_ascii" | "ply_binary"): Promise<Uint8Array> {
    const response = await fetch(this.url(`/sessions/${id}/mesh?format=${format}`));
    if (!response.ok) await parseError(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  async undo(id: string): Promise<StatePayload> {
    return this.json(`/sessions/${id}/undo`, { method: "POST" });
  }

  async pick(id: string, origin: Vec3, direction: Vec3): Promise<number | null> {
    const body = await this.json<{ vertex_id: number | null }>(`/sessions/${id}/pick`, {
      method: "POST",
      ...this.jsonBody({ origin, direction }),
    });
    return body.vertex_id;
  }
}
