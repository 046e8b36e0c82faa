"""HTTP+JSON session service around the shape-model engine.

Sessions live in memory: each holds a loaded model, the current coefficients
and mesh, the observation set and a bounded undo history. Within a session
mutating requests are serialized (single-writer); a writer that cannot get the
lock in time receives 409. Reads work on immutable snapshots and never block.

Posterior solves run synchronously below a size threshold (3N*M) and as
background jobs with a long-poll completion contract above it.
"""

from __future__ import annotations

import hashlib
import os
import secrets
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import ply
from .errors import ComputationCancelled, SsmError, StatismoFormatError
from .linalg import DEFAULT_RCOND
from .model import ShapeModel, TriangleMesh, instance, mean_shape, sample_random
from .picking import pick_vertex
from .posterior import Observation, ObservationSet, posterior_mean, resolve_pinned
from .statismo import load_statismo, validate_statismo


@dataclass
class ServiceConfig:
    model_byte_limit: int = 512 * 2**20
    session_ttl_seconds: float = 30 * 60.0
    default_rcond: float = DEFAULT_RCOND
    posterior_sync_threshold: int = 10_000_000  # 3N*M at which solves go async
    lock_timeout_seconds: float = 30.0
    history_depth: int = 64
    cors_origins: tuple[str, ...] = ("*",)  # browser explorer runs on another port

    @classmethod
    def from_env(cls, **overrides) -> "ServiceConfig":
        cfg = cls()
        env = {
            "model_byte_limit": ("SSMKIT_MODEL_BYTE_LIMIT", int),
            "session_ttl_seconds": ("SSMKIT_SESSION_TTL", float),
            "default_rcond": ("SSMKIT_RCOND", float),
            "posterior_sync_threshold": ("SSMKIT_SYNC_THRESHOLD", int),
        }
        for attr, (var, cast) in env.items():
            if os.environ.get(var):
                setattr(cfg, attr, cast(os.environ[var]))
        for attr, value in overrides.items():
            if value is not None:
                setattr(cfg, attr, value)
        return cfg


@dataclass(frozen=True)
class SessionState:
    """Immutable snapshot readers can use without locking."""

    alpha: np.ndarray
    mesh: TriangleMesh
    observations: ObservationSet
    mesh_version: int


@dataclass
class PosteriorJob:
    job_id: str
    status: str = "running"  # running | done | cancelled | error
    result: dict | None = None
    error: str | None = None
    done_event: threading.Event = field(default_factory=threading.Event)
    cancel_requested: bool = False


class Session:
    def __init__(self, session_id: str, model: ShapeModel, rcond: float, history_depth: int):
        self.session_id = session_id
        self.model = model
        self.rcond = rcond
        self.history_depth = history_depth
        self.history: list[tuple[np.ndarray, ObservationSet]] = []
        self.jobs: dict[str, PosteriorJob] = {}
        self.write_lock = threading.Lock()
        self.last_access = time.monotonic()
        alpha = np.zeros(model.n_components)
        self.state = SessionState(alpha, mean_shape(model), ObservationSet(), 1)
        self.triangulation_fingerprint = "sha256:" + hashlib.sha256(
            np.ascontiguousarray(model.triangulation, np.int32).tobytes()
        ).hexdigest()

    def touch(self) -> None:
        self.last_access = time.monotonic()

    def push_history(self) -> None:
        self.history.append((self.state.alpha, self.state.observations))
        if len(self.history) > self.history_depth:
            del self.history[0]

    def commit(self, alpha: np.ndarray, mesh: TriangleMesh, observations: ObservationSet) -> SessionState:
        self.state = SessionState(alpha, mesh, observations, self.state.mesh_version + 1)
        return self.state


class SessionStore:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self._sessions: dict[str, Session] = {}
        self._lock = threading.RLock()

    def sweep(self) -> None:
        deadline = time.monotonic() - self.config.session_ttl_seconds
        with self._lock:
            for sid in [s for s, sess in self._sessions.items() if sess.last_access < deadline]:
                del self._sessions[sid]

    def create(self, model: ShapeModel, rcond: float) -> Session:
        self.sweep()
        session = Session(secrets.token_hex(8), model, rcond, self.config.history_depth)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        self.sweep()
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        session.touch()
        return session

    def delete(self, session_id: str) -> bool:
        with self._lock:
            return self._sessions.pop(session_id, None) is not None


# --- request bodies ---------------------------------------------------------

class CoefficientsBody(BaseModel):
    alpha: list[float] | None = None
    updates: dict[int, float] | None = None


class RandomizeBody(BaseModel):
    seed: int | None = None


class ObservationBody(BaseModel):
    kind: str = "moved"
    target: list[float] | None = None


class ObservationListBody(BaseModel):
    observations: list[dict]
    rcond: float | None = None


class PickBody(BaseModel):
    origin: list[float]
    direction: list[float]


def _observation_payload(obs: ObservationSet) -> list[dict]:
    return [o.to_dict() for o in obs]


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="ssmkit session service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
        expose_headers=["X-Mesh-Version", "Content-Disposition"],
    )
    store = SessionStore(config)
    app.state.store = store
    app.state.config = config

    def acquire_writer(session: Session):
        if not session.write_lock.acquire(timeout=config.lock_timeout_seconds):
            raise HTTPException(
                status_code=409,
                detail="session is busy with another mutating request",
            )

    def state_payload(session: Session, state: SessionState, **extra) -> dict:
        payload = {
            "session_id": session.session_id,
            "mesh_version": state.mesh_version,
            "alpha": state.alpha.tolist(),
            **extra,
        }
        return payload

    def descriptor(session: Session, include_triangulation: bool = False) -> dict:
        state = session.state
        model = session.model
        out = {
            "session_id": session.session_id,
            "n_vertices": model.n_vertices,
            "m_components": model.n_components,
            "variances": model.variances.tolist(),
            "noise_variance": model.noise_variance,
            "rcond": session.rcond,
            "mesh_version": state.mesh_version,
            "alpha": state.alpha.tolist(),
            "observation_count": len(state.observations),
            "triangulation_fingerprint": session.triangulation_fingerprint,
            "metadata": dict(model.metadata),
        }
        if include_triangulation:
            out["triangulation"] = model.triangulation.tolist()
        return out

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(model: UploadFile, rcond: float | None = None):
        raw = await model.read(config.model_byte_limit + 1)
        if len(raw) > config.model_byte_limit:
            raise HTTPException(
                status_code=413,
                detail=f"model exceeds the configured limit of {config.model_byte_limit} bytes",
            )
        try:
            shape_model = load_statismo(raw)
        except StatismoFormatError as exc:
            report = validate_statismo(raw)
            raise HTTPException(
                status_code=422,
                detail={"message": str(exc), "violations": report.violations},
            ) from exc
        session = store.create(shape_model, rcond if rcond is not None else config.default_rcond)
        return descriptor(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return descriptor(store.get(session_id), include_triangulation=True)

    @app.delete("/sessions/{session_id}")
    def delete_session(session_id: str):
        store.get(session_id)
        return {"deleted": store.delete(session_id)}

    @app.put("/sessions/{session_id}/coefficients")
    def set_coefficients(session_id: str, body: CoefficientsBody):
        session = store.get(session_id)
        model = session.model
        acquire_writer(session)
        try:
            if (body.alpha is None) == (body.updates is None):
                raise HTTPException(
                    status_code=400, detail="provide exactly one of 'alpha' or 'updates'"
                )
            if body.alpha is not None:
                alpha = np.asarray(body.alpha, dtype=np.float64)
                if alpha.size != model.n_components:
                    raise HTTPException(
                        status_code=400,
                        detail=f"alpha has length {alpha.size}, model has "
                        f"{model.n_components} components",
                    )
            else:
                alpha = session.state.alpha.copy()
                for index, value in body.updates.items():
                    if not 0 <= index < model.n_components:
                        raise HTTPException(
                            status_code=400,
                            detail=f"component index {index} out of range "
                            f"[0, {model.n_components})",
                        )
                    alpha[index] = value
            if not np.all(np.isfinite(alpha)):
                raise HTTPException(status_code=400, detail="alpha contains non-finite values")
            session.push_history()
            state = session.commit(alpha, instance(model, alpha), session.state.observations)
            return state_payload(session, state)
        finally:
            session.write_lock.release()

    @app.post("/sessions/{session_id}/randomize")
    def randomize(session_id: str, body: RandomizeBody | None = None):
        session = store.get(session_id)
        seed = body.seed if body and body.seed is not None else secrets.randbits(32)
        acquire_writer(session)
        try:
            alpha, mesh = sample_random(session.model, seed)
            session.push_history()
            state = session.commit(alpha, mesh, session.state.observations)
            return state_payload(session, state, seed=seed)
        finally:
            session.write_lock.release()

    @app.get("/sessions/{session_id}/observations")
    def list_observations(session_id: str):
        session = store.get(session_id)
        state = session.state
        return {
            "mesh_version": state.mesh_version,
            "observations": _observation_payload(state.observations),
        }

    @app.get("/sessions/{session_id}/observations/{vertex_id}")
    def get_observation(session_id: str, vertex_id: int):
        session = store.get(session_id)
        state = session.state
        for obs in state.observations:
            if obs.vertex_id == vertex_id:
                return {"mesh_version": state.mesh_version, "observation": obs.to_dict()}
        raise HTTPException(status_code=404, detail=f"no observation for vertex {vertex_id}")

    @app.put("/sessions/{session_id}/observations/{vertex_id}", status_code=201)
    def put_observation(session_id: str, vertex_id: int, body: ObservationBody):
        session = store.get(session_id)
        model = session.model
        if not 0 <= vertex_id < model.n_vertices:
            raise HTTPException(
                status_code=400,
                detail=f"vertex id {vertex_id} out of range [0, {model.n_vertices})",
            )
        acquire_writer(session)
        try:
            state = session.state
            if vertex_id in state.observations.vertex_ids():
                raise HTTPException(
                    status_code=409,
                    detail=f"vertex {vertex_id} already has an observation; delete it first",
                )
            target = body.target
            if target is None:
                if body.kind != "pinned":
                    raise HTTPException(
                        status_code=400, detail="a 'moved' observation requires a target"
                    )
                target = state.mesh.vertex(vertex_id)
            try:
                obs = Observation(vertex_id=vertex_id, target=target, kind=body.kind)
            except (ValueError, SsmError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            session.push_history()
            new_set = ObservationSet(state.observations.observations + (obs,))
            state = session.commit(state.alpha, state.mesh, new_set)
            return state_payload(session, state, observation=obs.to_dict())
        finally:
            session.write_lock.release()

    @app.put("/sessions/{session_id}/observations")
    def replace_observations(session_id: str, body: ObservationListBody):
        session = store.get(session_id)
        acquire_writer(session)
        try:
            state = session.state
            try:
                new_set = resolve_pinned(body.observations, state.mesh)
            except (ValueError, SsmError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            for obs in new_set:
                if obs.vertex_id >= session.model.n_vertices:
                    raise HTTPException(
                        status_code=400,
                        detail=f"vertex id {obs.vertex_id} out of range "
                        f"[0, {session.model.n_vertices})",
                    )
            if body.rcond is not None:
                session.rcond = body.rcond
            session.push_history()
            state = session.commit(state.alpha, state.mesh, new_set)
            return state_payload(
                session, state, observations=_observation_payload(new_set)
            )
        finally:
            session.write_lock.release()

    @app.delete("/sessions/{session_id}/observations/{vertex_id}")
    def delete_observation(session_id: str, vertex_id: int):
        session = store.get(session_id)
        acquire_writer(session)
        try:
            state = session.state
            remaining = tuple(o for o in state.observations if o.vertex_id != vertex_id)
            if len(remaining) == len(state.observations):
                raise HTTPException(
                    status_code=404, detail=f"no observation for vertex {vertex_id}"
                )
            session.push_history()
            state = session.commit(state.alpha, state.mesh, ObservationSet(remaining))
            return state_payload(session, state, deleted=vertex_id)
        finally:
            session.write_lock.release()

    @app.delete("/sessions/{session_id}/observations")
    def clear_observations(session_id: str):
        session = store.get(session_id)
        acquire_writer(session)
        try:
            state = session.state
            count = len(state.observations)
            session.push_history()
            state = session.commit(state.alpha, state.mesh, ObservationSet())
            return state_payload(session, state, deleted_count=count)
        finally:
            session.write_lock.release()

    def run_posterior(session: Session, job: PosteriorJob | None) -> dict:
        """Compute and commit the posterior; caller must hold the write lock."""
        state = session.state
        if len(state.observations) == 0:
            return state_payload(
                session,
                state,
                changed=False,
                notice="no observations; shape left unchanged",
            )
        mesh, alpha = posterior_mean(
            session.model,
            state.observations,
            rcond=session.rcond,
            current=state.mesh,
            current_alpha=state.alpha,
            cancel_check=(lambda: job.cancel_requested) if job else None,
        )
        session.push_history()
        new_state = session.commit(alpha, mesh, state.observations)
        return state_payload(session, new_state, changed=True)

    @app.post("/sessions/{session_id}/posterior")
    def compute_posterior(session_id: str, response: Response):
        session = store.get(session_id)
        model = session.model
        size = 3 * model.n_vertices * model.n_components
        if size <= config.posterior_sync_threshold:
            acquire_writer(session)
            try:
                return run_posterior(session, None)
            finally:
                session.write_lock.release()

        job = PosteriorJob(job_id=secrets.token_hex(8))
        finished = [j for j, v in session.jobs.items() if v.status != "running"]
        for stale in finished[:-8]:
            del session.jobs[stale]
        session.jobs[job.job_id] = job

        def worker():
            if not session.write_lock.acquire(timeout=config.lock_timeout_seconds):
                job.status, job.error = "error", "session stayed busy; job abandoned"
                job.done_event.set()
                return
            try:
                if job.cancel_requested:
                    job.status = "cancelled"
                else:
                    job.result = run_posterior(session, job)
                    job.status = "done"
            except ComputationCancelled:
                job.status = "cancelled"
            except Exception as exc:  # surfaced through job polling
                job.status, job.error = "error", str(exc)
            finally:
                session.write_lock.release()
                job.done_event.set()

        threading.Thread(target=worker, daemon=True).start()
        response.status_code = 202
        return {"job_id": job.job_id, "status": job.status}

    def get_job(session: Session, job_id: str) -> PosteriorJob:
        job = session.jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown posterior job {job_id!r}")
        return job

    @app.get("/sessions/{session_id}/posterior/jobs/{job_id}")
    def poll_posterior(session_id: str, job_id: str, wait_ms: int = 0):
        session = store.get(session_id)
        job = get_job(session, job_id)
        if wait_ms > 0:
            job.done_event.wait(timeout=wait_ms / 1000.0)
        out = {"job_id": job.job_id, "status": job.status}
        if job.status == "done":
            out["result"] = job.result
        elif job.status == "error":
            out["error"] = job.error
        return out

    @app.delete("/sessions/{session_id}/posterior/jobs/{job_id}")
    def cancel_posterior(session_id: str, job_id: str):
        session = store.get(session_id)
        job = get_job(session, job_id)
        if job.status == "running":
            job.cancel_requested = True
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/sessions/{session_id}/mesh")
    def get_mesh(session_id: str, format: str = "json"):
        session = store.get(session_id)
        state = session.state
        if format == "json":
            return {
                "mesh_version": state.mesh_version,
                "positions": state.mesh.positions.tolist(),
                "triangulation_fingerprint": session.triangulation_fingerprint,
            }
        if format in ("ply_ascii", "ply_binary"):
            mode = ply.ASCII if format == "ply_ascii" else ply.BINARY_LE
            payload = ply.export_ply(state.mesh, mode)
            return Response(
                content=payload,
                media_type="application/octet-stream",
                headers={
                    "Content-Disposition": 'attachment; filename="shape.ply"',
                    "X-Mesh-Version": str(state.mesh_version),
                },
            )
        raise HTTPException(
            status_code=400,
            detail=f"unknown mesh format {format!r}; use json, ply_ascii or ply_binary",
        )

    @app.post("/sessions/{session_id}/undo")
    def undo(session_id: str):
        session = store.get(session_id)
        acquire_writer(session)
        try:
            if not session.history:
                state = session.state
                return state_payload(
                    session,
                    state,
                    undone=False,
                    observations=_observation_payload(state.observations),
                )
            alpha, observations = session.history.pop()
            state = session.commit(alpha, instance(session.model, alpha), observations)
            return state_payload(
                session,
                state,
                undone=True,
                observations=_observation_payload(observations),
            )
        finally:
            session.write_lock.release()

    @app.post("/sessions/{session_id}/pick")
    def pick(session_id: str, body: PickBody):
        session = store.get(session_id)
        try:
            vertex_id = pick_vertex(session.state.mesh, body.origin, body.direction)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"vertex_id": vertex_id, "mesh_version": session.state.mesh_version}

    return app


def run_server(
    host: str = "127.0.0.1",
    port: int = 8080,
    config: ServiceConfig | None = None,
    log_level: str = "info",
) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port, log_level=log_level)
