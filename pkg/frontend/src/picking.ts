/** Local vertex picking, kept in lockstep with the service's reference
 * implementation: Moeller-Trumbore over all triangles (front and back faces),
 * earliest hit, then nearest vertex of the whole mesh to the hit point.
 * Contract tests assert id-level agreement with the service. */

import type { Vec3 } from "./api.js";

const DET_EPS = 1e-12;
const BARY_EPS = 1e-12;

export interface MeshArrays {
  /** flat xyz positions, length 3N */
  positions: ArrayLike<number>;
  /** flat triangle indices, length 3C */
  triangles: ArrayLike<number>;
}

function sub(out: Vec3, a: ArrayLike<number>, ai: number, b: ArrayLike<number>, bi: number): Vec3 {
  out[0] = a[ai] - b[bi];
  out[1] = a[ai + 1] - b[bi + 1];
  out[2] = a[ai + 2] - b[bi + 2];
  return out;
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function nearestVertex(positions: ArrayLike<number>, point: Vec3): number {
  const count = Math.floor(positions.length / 3);
  if (count === 0) throw new Error("mesh has no vertices");
  let bestId = 0;
  let bestD2 = Infinity;
  for (let i = 0; i < count; i++) {
    const dx = positions[3 * i] - point[0];
    const dy = positions[3 * i + 1] - point[1];
    const dz = positions[3 * i + 2] - point[2];
    const d2 = dx * dx + dy * dy + dz * dz;
    if (d2 < bestD2) {
      bestD2 = d2;
      bestId = i; // strict < keeps the lowest id on ties
    }
  }
  return bestId;
}

export interface RayHit {
  t: number;
  triangle: number;
}

export function rayMeshFirstHit(mesh: MeshArrays, origin: Vec3, direction: Vec3): RayHit | null {
  const norm = Math.hypot(direction[0], direction[1], direction[2]);
  if (Math.abs(norm - 1.0) > 1e-6) {
    throw new Error(`ray direction must be unit length, got norm ${norm}`);
  }
  const triCount = Math.floor(mesh.triangles.length / 3);
  let best: RayHit | null = null;
  const e1: Vec3 = [0, 0, 0];
  const e2: Vec3 = [0, 0, 0];
  const tvec: Vec3 = [0, 0, 0];
  for (let c = 0; c < triCount; c++) {
    const i0 = 3 * mesh.triangles[3 * c];
    const i1 = 3 * mesh.triangles[3 * c + 1];
    const i2 = 3 * mesh.triangles[3 * c + 2];
    sub(e1, mesh.positions, i1, mesh.positions, i0);
    sub(e2, mesh.positions, i2, mesh.positions, i0);
    const pvec = cross(direction, e2);
    const det = dot(e1, pvec);
    if (Math.abs(det) <= DET_EPS) continue;
    const invDet = 1.0 / det;
    tvec[0] = origin[0] - mesh.positions[i0];
    tvec[1] = origin[1] - mesh.positions[i0 + 1];
    tvec[2] = origin[2] - mesh.positions[i0 + 2];
    const u = dot(tvec, pvec) * invDet;
    if (u < -BARY_EPS) continue;
    const qvec = cross(tvec, e1);
    const v = dot(direction, qvec) * invDet;
    if (v < -BARY_EPS || u + v > 1.0 + BARY_EPS) continue;
    const t = dot(e2, qvec) * invDet;
    if (t < 0.0) continue;
    if (best === null || t < best.t) best = { t, triangle: c };
  }
  return best;
}

export function pickVertex(mesh: MeshArrays, origin: Vec3, direction: Vec3): number | null {
  const hit = rayMeshFirstHit(mesh, origin, direction);
  if (hit === null) return null;
  const point: Vec3 = [
    origin[0] + hit.t * direction[0],
    origin[1] + hit.t * direction[1],
    origin[2] + hit.t * direction[2],
  ];
  return nearestVertex(mesh.positions, point);
}
