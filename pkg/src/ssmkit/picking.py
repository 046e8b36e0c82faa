"""Vertex selection helpers: nearest vertex to a point, ray picking.

The ray test is a vectorized Moeller-Trumbore intersection over all
triangles, front and back faces alike. The browser companion runs the same
math locally; this is the reference the two are tested against.
"""

from __future__ import annotations

import numpy as np

from .model import TriangleMesh

_DET_EPS = 1e-12   # below this the ray is treated as parallel to the triangle
_BARY_EPS = 1e-12  # inclusive triangle-edge tolerance for u, v


def nearest_vertex(mesh: TriangleMesh, point) -> int:
    """Id of the vertex closest to ``point``; ties go to the lowest id."""
    if mesh.n_vertices == 0:
        raise ValueError("mesh has no vertices")
    p = np.asarray(point, dtype=np.float64).ravel()
    if p.size != 3:
        raise ValueError(f"point must be a 3-vector, got length {p.size}")
    d2 = np.einsum("ij,ij->i", mesh.points - p, mesh.points - p)
    return int(np.argmin(d2))  # argmin returns the first (lowest) index on ties


def ray_mesh_first_hit(mesh: TriangleMesh, origin, direction) -> tuple[float, int] | None:
    """First intersection of the ray with any triangle.

    Returns (t, triangle_index) for the smallest t >= 0, or None on a miss.
    """
    o = np.asarray(origin, dtype=np.float64).ravel()
    d = np.asarray(direction, dtype=np.float64).ravel()
    if o.size != 3 or d.size != 3:
        raise ValueError("ray origin and direction must be 3-vectors")
    norm = np.linalg.norm(d)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"ray direction must be unit length, got norm {norm:.8g}")
    if mesh.n_triangles == 0:
        return None

    pts = mesh.points
    v0 = pts[mesh.triangles[:, 0]]
    e1 = pts[mesh.triangles[:, 1]] - v0
    e2 = pts[mesh.triangles[:, 2]] - v0

    pvec = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > _DET_EPS
    if not ok.any():
        return None
    inv_det = np.zeros_like(det)
    inv_det[ok] = 1.0 / det[ok]

    tvec = o - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
    qvec = np.cross(tvec, e1)
    v = qvec @ d * inv_det
    t = np.einsum("ij,ij->i", e2, qvec) * inv_det

    hit = ok & (u >= -_BARY_EPS) & (v >= -_BARY_EPS) & (u + v <= 1.0 + _BARY_EPS) & (t >= 0.0)
    if not hit.any():
        return None
    idx = np.flatnonzero(hit)
    best = idx[np.argmin(t[idx])]
    return float(t[best]), int(best)


def pick_vertex(mesh: TriangleMesh, ray_origin, ray_dir) -> int | None:
    """Vertex nearest to the ray's first hit point, or None on a miss."""
    hit = ray_mesh_first_hit(mesh, ray_origin, ray_dir)
    if hit is None:
        return None
    t, _ = hit
    o = np.asarray(ray_origin, dtype=np.float64).ravel()
    d = np.asarray(ray_dir, dtype=np.float64).ravel()
    return nearest_vertex(mesh, o + t * d)
