/** Axis-constrained drag handles for the selected vertex.
 *
 * Dragging is restricted to one axis at a time (free-space dragging is
 * ambiguous under perspective). A drag only stages the move; committing it
 * is the panel's confirm button. */

import * as THREE from "three";

import type { Vec3 } from "./api.js";
import type { ExplorerState } from "./state.js";
import type { MeshViewer } from "./viewer.js";

const AXES: Array<{ name: "x" | "y" | "z"; dir: Vec3; color: number }> = [
  { name: "x", dir: [1, 0, 0], color: 0xe24a4a },
  { name: "y", dir: [0, 1, 0], color: 0x4ae24a },
  { name: "z", dir: [0, 0, 1], color: 0x4a6ae2 },
];

export class AxisGizmo {
  private group = new THREE.Group();
  private handles: THREE.Mesh[] = [];
  private dragging: { axis: Vec3; start: Vec3 } | null = null;
  private size = 0.3;

  constructor(
    private readonly viewer: MeshViewer,
    private readonly state: ExplorerState,
  ) {
    for (const axis of AXES) {
      const material = new THREE.MeshBasicMaterial({ color: axis.color });
      const shaft = new THREE.Mesh(
        new THREE.CylinderGeometry(0.02, 0.02, 1, 8),
        material,
      );
      shaft.position.y = 0.5;
      const tip = new THREE.Mesh(new THREE.ConeGeometry(0.06, 0.18, 12), material);
      tip.position.y = 1.05;
      const handle = new THREE.Group();
      handle.add(shaft, tip);
      const carrier = new THREE.Mesh(
        new THREE.CylinderGeometry(0.09, 0.09, 1.2, 6),
        new THREE.MeshBasicMaterial({ visible: false }),
      );
      carrier.position.y = 0.6;
      carrier.userData.axis = axis.dir;
      handle.add(carrier);
      handle.quaternion.setFromUnitVectors(
        new THREE.Vector3(0, 1, 0),
        new THREE.Vector3(...axis.dir),
      );
      this.group.add(handle);
      this.handles.push(carrier);
    }
    this.group.visible = false;
    viewer.scene.add(this.group);

    state.onChange((event) => {
      if (event === "selection" || event === "mesh" || event === "session") this.sync();
    });

    const canvas = viewer.renderer.domElement;
    canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    canvas.addEventListener("pointerup", () => this.onPointerUp());
  }

  /** Visible exactly when a vertex is selected, anchored at that vertex. */
  private sync(): void {
    const anchor = this.state.staged?.target ?? this.state.gizmoPosition;
    this.group.visible = anchor !== null && anchor !== undefined;
    if (anchor) {
      this.group.position.set(anchor[0], anchor[1], anchor[2]);
      const distance = this.viewer.camera.position.distanceTo(this.group.position);
      this.size = distance * 0.12;
      this.group.scale.setScalar(this.size);
    }
  }

  get isDragging(): boolean {
    return this.dragging !== null;
  }

  private onPointerDown(event: PointerEvent): void {
    if (this.state.selectedVertex === null || !this.group.visible) return;
    const { origin, direction } = this.viewer.rayFromPointer(event);
    const raycaster = new THREE.Raycaster(
      new THREE.Vector3(...origin),
      new THREE.Vector3(...direction),
    );
    const hits = raycaster.intersectObjects(this.handles, false);
    if (hits.length === 0) return;
    const axis = hits[0].object.userData.axis as Vec3;
    const staged = this.state.staged ?? this.state.beginDrag();
    this.dragging = { axis, start: staged.target };
    this.viewer.controls.enabled = false;
  }

  private onPointerMove(event: PointerEvent): void {
    if (!this.dragging || !this.state.staged) return;
    const { origin, direction } = this.viewer.rayFromPointer(event);
    const t = closestAxisParameter(this.state.staged.original, this.dragging.axis, origin, direction);
    if (t === null) return;
    const base = this.state.staged.original;
    this.state.dragTo([
      base[0] + t * this.dragging.axis[0],
      base[1] + t * this.dragging.axis[1],
      base[2] + t * this.dragging.axis[2],
    ]);
    this.sync();
  }

  private onPointerUp(): void {
    if (this.dragging) {
      this.dragging = null;
      this.viewer.controls.enabled = true;
    }
  }
}

/** Parameter of the point on line (point + t*axis) closest to the ray. */
export function closestAxisParameter(
  point: Vec3,
  axis: Vec3,
  rayOrigin: Vec3,
  rayDir: Vec3,
): number | null {
  const w: Vec3 = [point[0] - rayOrigin[0], point[1] - rayOrigin[1], point[2] - rayOrigin[2]];
  const b = axis[0] * rayDir[0] + axis[1] * rayDir[1] + axis[2] * rayDir[2];
  const d = axis[0] * w[0] + axis[1] * w[1] + axis[2] * w[2];
  const e = rayDir[0] * w[0] + rayDir[1] * w[1] + rayDir[2] * w[2];
  const denom = 1 - b * b;
  if (Math.abs(denom) < 1e-9) return null; // axis parallel to the view ray
  return (b * e - d) / denom;
}
