"""Independent reference computations the tests check the engine against.

Each oracle deliberately takes a different route than the code it verifies:
normal equations instead of the pseudo-inverse, per-vertex scans instead of
vectorized argmin, plane/barycentric ray tests instead of Moeller-Trumbore.
"""

import numpy as np


def lstsq_normal_equations(a, b):
    """Least-squares solution via the normal equations (full column rank only)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return np.linalg.solve(a.T @ a, a.T @ b)


def nearest_vertex_scan(mesh, point):
    """Exhaustive per-vertex scan with the tie rule (lowest id wins)."""
    best_id, best_d2 = None, None
    for i in range(mesh.n_vertices):
        d = mesh.vertex(i) - np.asarray(point, float)
        d2 = float(d @ d)
        if best_d2 is None or d2 < best_d2:
            best_id, best_d2 = i, d2
    return best_id


def ray_triangle_hits_scan(mesh, origin, direction):
    """All ray/triangle hits via plane intersection + barycentric containment.

    Returns a list of (t, triangle_index) with t >= 0, unsorted.
    """
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    hits = []
    pts = mesh.points
    for tri_index, (i, j, k) in enumerate(mesh.triangles):
        a, b, c = pts[i], pts[j], pts[k]
        n = np.cross(b - a, c - a)
        denom = n @ d
        if abs(denom) < 1e-12:
            continue
        t = (n @ (a - o)) / denom
        if t < 0:
            continue
        p = o + t * d
        # barycentric coordinates of p in triangle (a, b, c)
        v0, v1, v2 = b - a, c - a, p - a
        d00, d01, d11 = v0 @ v0, v0 @ v1, v1 @ v1
        d20, d21 = v2 @ v0, v2 @ v1
        det = d00 * d11 - d01 * d01
        if abs(det) < 1e-300:
            continue
        v = (d11 * d20 - d01 * d21) / det
        w = (d00 * d21 - d01 * d20) / det
        u = 1.0 - v - w
        eps = 1e-9
        if u >= -eps and v >= -eps and w >= -eps:
            hits.append((float(t), tri_index))
    return hits


def pick_vertex_scan(mesh, origin, direction):
    """Brute-force picking: earliest hit, then per-vertex nearest scan."""
    hits = ray_triangle_hits_scan(mesh, origin, direction)
    if not hits:
        return None
    t = min(h[0] for h in hits)
    p = np.asarray(origin, float) + t * np.asarray(direction, float)
    return nearest_vertex_scan(mesh, p)


def principal_angles(a, b):
    """Angles between the column spaces of a and b, in radians."""
    qa, _ = np.linalg.qr(np.asarray(a, float))
    qb, _ = np.linalg.qr(np.asarray(b, float))
    sigma = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return np.arccos(np.clip(sigma, -1.0, 1.0))
