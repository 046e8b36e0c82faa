"""Posterior-mean reconstruction from partial observations.

Given a set of observed vertices (moved to a target or pinned in place), the
rows of the mean and of the scaled basis belonging to those vertices are
selected, the coefficients are recovered with a pseudo-inverse solve, and the
full shape is re-instanced. Observations act as hard constraints in the
least-squares sense; the model's stored noise variance plays no role here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import linalg
from .errors import ComputationCancelled, DimensionError
from .model import ShapeModel, TriangleMesh, instance, mean_shape

KINDS = ("moved", "pinned")


@dataclass(frozen=True)
class Observation:
    """One constrained vertex: where it must end up, and why.

    ``moved`` carries a user-chosen target; ``pinned`` records the vertex's
    displayed position at creation time so it stays put.
    """

    vertex_id: int
    target: np.ndarray  # (3,) absolute position, model units
    kind: str = "moved"

    def __post_init__(self):
        target = np.ascontiguousarray(self.target, dtype=np.float64).ravel()
        if target.size != 3:
            raise DimensionError(f"observation target must be a 3-vector, got {target.size}")
        if not np.all(np.isfinite(target)):
            raise ValueError("observation target contains non-finite values")
        if self.kind not in KINDS:
            raise ValueError(f"observation kind must be one of {KINDS}, got {self.kind!r}")
        if self.vertex_id < 0:
            raise ValueError(f"vertex_id must be >= 0, got {self.vertex_id}")
        target.setflags(write=False)
        object.__setattr__(self, "vertex_id", int(self.vertex_id))
        object.__setattr__(self, "target", target)

    def to_dict(self) -> dict:
        return {
            "vertex_id": self.vertex_id,
            "target": [float(v) for v in self.target],
            "kind": self.kind,
        }


@dataclass(frozen=True)
class ObservationSet:
    """Observations with unique vertex ids; insertion order is preserved."""

    observations: tuple[Observation, ...] = ()

    def __post_init__(self):
        obs = tuple(self.observations)
        ids = [o.vertex_id for o in obs]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise ValueError(f"duplicate observation for vertex {dup}")
        object.__setattr__(self, "observations", obs)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self):
        return iter(self.observations)

    def vertex_ids(self) -> list[int]:
        return [o.vertex_id for o in self.observations]

    def to_dict(self) -> dict:
        return {"observations": [o.to_dict() for o in self.observations]}


@dataclass(frozen=True)
class SubModel:
    """Mean entries and scaled-basis rows for the observed vertices.

    Rows follow ``index_map`` (ascending vertex ids) expanded to x, y, z
    triples, so assembly is canonical regardless of observation order.
    """

    mean_p: np.ndarray     # (3k,)
    basis_q_p: np.ndarray  # (3k, M)
    index_map: np.ndarray  # (k,) ascending vertex ids

    def __post_init__(self):
        for name in ("mean_p", "basis_q_p", "index_map"):
            a = np.asarray(getattr(self, name))
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def _flat_indices(vertex_ids: np.ndarray) -> np.ndarray:
    return (3 * vertex_ids[:, None] + np.arange(3)).ravel()


def select_rows(model: ShapeModel, obs: ObservationSet) -> SubModel:
    """Select the mean entries and scaled-basis rows of the observed vertices."""
    if len(obs) == 0:
        raise ValueError("cannot select rows for an empty observation set")
    ids = np.array(sorted(obs.vertex_ids()), dtype=np.int64)
    if ids[-1] >= model.n_vertices:
        raise ValueError(
            f"vertex id {ids[-1]} out of range for model with {model.n_vertices} vertices"
        )
    rows = _flat_indices(ids)
    return SubModel(
        mean_p=model.mean[rows],
        basis_q_p=model.scaled_basis_rows(rows),
        index_map=ids,
    )


def assemble_targets(sub: SubModel, obs: ObservationSet) -> np.ndarray:
    """Stack observation targets into a flat vector in index_map order."""
    by_id = {o.vertex_id: o.target for o in obs}
    return np.concatenate([by_id[int(v)] for v in sub.index_map])


def solve_alpha(
    sub: SubModel,
    obs: ObservationSet,
    rcond: float = linalg.DEFAULT_RCOND,
) -> np.ndarray:
    """Coefficients whose instance best matches the observed positions.

    Solves basis_q_p @ alpha = s_p - mean_p with the Moore-Penrose
    pseudo-inverse, which yields the least-squares solution of minimum norm.
    """
    s_p = assemble_targets(sub, obs)
    return linalg.pinv(sub.basis_q_p, rcond=rcond) @ (s_p - sub.mean_p)


def posterior_mean(
    model: ShapeModel,
    obs: ObservationSet,
    rcond: float = linalg.DEFAULT_RCOND,
    current: TriangleMesh | None = None,
    current_alpha: np.ndarray | None = None,
    cancel_check: Callable[[], bool] | None = None,
) -> tuple[TriangleMesh, np.ndarray]:
    """Most probable full shape consistent with the observations.

    With an empty observation set the current shape is returned unchanged
    (the caller passes it in; without one, the model mean). ``cancel_check``
    is polled between stages so long solves can be abandoned.
    """

    def _checkpoint():
        if cancel_check is not None and cancel_check():
            raise ComputationCancelled("posterior computation cancelled")

    if len(obs) == 0:
        if current is not None:
            alpha = (
                np.asarray(current_alpha, dtype=np.float64)
                if current_alpha is not None
                else np.zeros(model.n_components)
            )
            return current, alpha
        return mean_shape(model), np.zeros(model.n_components)

    sub = select_rows(model, obs)
    _checkpoint()
    alpha = solve_alpha(sub, obs, rcond=rcond)
    _checkpoint()
    return instance(model, alpha), alpha


def resolve_pinned(entries: Iterable[dict], current: TriangleMesh) -> ObservationSet:
    """Build observations from dicts, filling pinned targets from the mesh.

    ``entries`` follow the observation JSON schema: each has ``vertex_id``,
    ``kind`` (default ``moved``) and ``target`` — the latter optional for
    pinned observations, which then anchor to the vertex's current position.
    """
    built = []
    for entry in entries:
        if "vertex_id" not in entry:
            raise ValueError("observation entry is missing 'vertex_id'")
        vid = int(entry["vertex_id"])
        kind = entry.get("kind", "moved")
        target = entry.get("target")
        if target is None:
            if kind != "pinned":
                raise ValueError(
                    f"observation for vertex {vid} has kind {kind!r} but no target"
                )
            if vid < 0 or vid >= current.n_vertices:
                raise ValueError(
                    f"vertex id {vid} out of range for mesh with {current.n_vertices} vertices"
                )
            target = current.vertex(vid)
        built.append(Observation(vertex_id=vid, target=target, kind=kind))
    return ObservationSet(tuple(built))


def load_observations(
    payload: str | bytes | dict,
    current: TriangleMesh,
) -> tuple[ObservationSet, float | None]:
    """Parse the observation JSON schema; returns (observations, rcond or None)."""
    doc = json.loads(payload) if isinstance(payload, (str, bytes)) else payload
    if not isinstance(doc, dict) or "observations" not in doc:
        raise ValueError("observation document must be an object with an 'observations' list")
    obs = resolve_pinned(doc["observations"], current)
    rcond = doc.get("rcond")
    return obs, (float(rcond) if rcond is not None else None)


def dump_observations(obs: ObservationSet, rcond: float | None = None) -> str:
    doc = obs.to_dict()
    if rcond is not None:
        doc["rcond"] = rcond
    return json.dumps(doc, indent=2)
