/** Secondary acceptance: 100 scripted rays must pick the same vertex ids
 * locally as the service's reference pick endpoint. */

import { readFileSync } from "node:fs";
import { beforeAll, describe, expect, inject, it } from "vitest";

import { SessionApi, type Vec3 } from "../src/api.js";
import { nearestVertex, pickVertex, rayMeshFirstHit } from "../src/picking.js";

/** Deterministic PRNG so the scripted rays are reproducible. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

describe("picking math", () => {
  const square = {
    positions: [0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0],
    triangles: [0, 1, 2, 1, 3, 2],
  };

  it("nearest vertex takes the lowest id on ties", () => {
    expect(nearestVertex([1, 0, 0, -1, 0, 0], [0, 0, 0])).toBe(0);
    expect(nearestVertex(square.positions, [0.9, 0.1, 0])).toBe(1);
  });

  it("hits front and back faces, earliest t first", () => {
    const down = rayMeshFirstHit(square, [0.25, 0.25, 5], [0, 0, -1]);
    const up = rayMeshFirstHit(square, [0.25, 0.25, -5], [0, 0, 1]);
    expect(down?.t).toBeCloseTo(5, 10);
    expect(up?.t).toBeCloseTo(5, 10);
    expect(down?.triangle).toBe(0);
  });

  it("misses return null", () => {
    expect(pickVertex(square, [10, 10, 5], [0, 0, -1])).toBeNull();
  });

  it("rejects non-unit directions", () => {
    expect(() => pickVertex(square, [0, 0, 5], [0, 0, -2])).toThrow(/unit/);
  });

  it("picks the triangle vertex closest to the hit point", () => {
    expect(pickVertex(square, [0.1, 0.2, 5], [0, 0, -1])).toBe(0);
    expect(pickVertex(square, [0.9, 0.8, 5], [0, 0, -1])).toBe(3);
  });
});

describe("picking parity with the service", () => {
  const api = new SessionApi(inject("baseUrl"));
  let sessionId: string;
  let mesh: { positions: number[]; triangles: number[] };

  beforeAll(async () => {
    const model = readFileSync(inject("modelPath"));
    const descriptor = await api.createSession(new Uint8Array(model));
    sessionId = descriptor.session_id;
    const full = await api.getSession(sessionId);
    const meshJson = await api.getMeshJson(sessionId);
    mesh = {
      positions: meshJson.positions,
      triangles: (full.triangulation ?? []).flat(),
    };
  });

  it("agrees with pick_vertex on 100 scripted rays", async () => {
    const rand = mulberry32(20240);
    let hits = 0;
    for (let i = 0; i < 100; i++) {
      // origins outside the unit sphere, aimed at jittered interior points
      const origin: Vec3 = [rand() * 6 - 3, rand() * 6 - 3, rand() * 6 - 3];
      const norm = Math.hypot(...origin) || 1;
      for (let k = 0; k < 3; k++) origin[k] = (origin[k] / norm) * 2.5;
      const aim: Vec3 = [rand() * 1.2 - 0.6, rand() * 1.2 - 0.6, rand() * 1.2 - 0.6];
      const direction: Vec3 = [aim[0] - origin[0], aim[1] - origin[1], aim[2] - origin[2]];
      const dnorm = Math.hypot(...direction);
      for (let k = 0; k < 3; k++) direction[k] /= dnorm;

      const local = pickVertex(mesh, origin, direction);
      const remote = await api.pick(sessionId, origin, direction);
      expect(remote).toBe(local);
      if (local !== null) hits++;
    }
    expect(hits).toBeGreaterThan(60); // the rays were aimed at the sphere
  });

  it("agrees after the mesh changes shape", async () => {
    const descriptor = await api.createSession(
      new Uint8Array(readFileSync(inject("modelPath"))),
    );
    await api.randomize(descriptor.session_id, 77);
    const meshJson = await api.getMeshJson(descriptor.session_id);
    const full = await api.getSession(descriptor.session_id);
    const changed = {
      positions: meshJson.positions,
      triangles: (full.triangulation ?? []).flat(),
    };
    const rand = mulberry32(7);
    for (let i = 0; i < 20; i++) {
      const origin: Vec3 = [rand() * 4 - 2, rand() * 4 - 2, 3 + rand()];
      const direction: Vec3 = [-origin[0], -origin[1], -origin[2]];
      const n = Math.hypot(...direction);
      for (let k = 0; k < 3; k++) direction[k] /= n;
      expect(await api.pick(descriptor.session_id, origin, direction)).toBe(
        pickVertex(changed, origin, direction),
      );
    }
  });
});
