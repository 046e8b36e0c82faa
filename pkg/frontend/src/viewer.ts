/** three.js scene: renders the current mesh, observation markers (original
 * red, target green), the selection highlight, and converts screen clicks
 * into rays for picking. All geometry comes from the session state. */

import * as THREE from "three";
import { OrbitControls } from "three/addons/controls/OrbitControls.js";

import type { Vec3 } from "./api.js";
import type { ExplorerState } from "./state.js";

const COLOR_ORIGINAL = 0xd62728; // red: position before the move / pinned anchor
const COLOR_TARGET = 0x2ca02c; // green: requested new position
const COLOR_SELECTED = 0xffc400;

export class MeshViewer {
  readonly renderer: THREE.WebGLRenderer;
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly controls: OrbitControls;

  private mesh: THREE.Mesh | null = null;
  private wire: THREE.LineSegments | null = null;
  private markers = new THREE.Group();
  private selectionMarker: THREE.Mesh;
  private markerRadius = 0.02;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly state: ExplorerState,
  ) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    this.camera = new THREE.PerspectiveCamera(45, 1, 0.01, 1000);
    this.camera.position.set(0, 0, 6);
    this.controls = new OrbitControls(this.camera, canvas);
    this.controls.enableDamping = true;

    this.scene.background = new THREE.Color(0x10131a);
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.2);
    key.position.set(3, 4, 5);
    this.scene.add(key);
    const fill = new THREE.DirectionalLight(0x8899ff, 0.4);
    fill.position.set(-4, -2, -3);
    this.scene.add(fill);
    this.scene.add(this.markers);

    this.selectionMarker = new THREE.Mesh(
      new THREE.SphereGeometry(1, 16, 12),
      new THREE.MeshBasicMaterial({ color: COLOR_SELECTED }),
    );
    this.selectionMarker.visible = false;
    this.scene.add(this.selectionMarker);

    state.onChange((event) => {
      if (event === "session") this.rebuildMesh();
      if (event === "mesh") this.updatePositions();
      if (event === "mesh" || event === "observations" || event === "staged") this.updateMarkers();
      if (event === "mesh" || event === "selection") this.updateSelection();
    });

    window.addEventListener("resize", () => this.resize());
    this.resize();
    this.renderer.setAnimationLoop(() => {
      this.controls.update();
      this.renderer.render(this.scene, this.camera);
    });
  }

  private resize(): void {
    const width = this.canvas.clientWidth || this.canvas.parentElement?.clientWidth || 800;
    const height = this.canvas.clientHeight || this.canvas.parentElement?.clientHeight || 600;
    this.renderer.setSize(width, height, false);
    this.camera.aspect = width / height;
    this.camera.updateProjectionMatrix();
  }

  private rebuildMesh(): void {
    if (this.mesh) {
      this.scene.remove(this.mesh);
      this.mesh.geometry.dispose();
    }
    if (this.wire) {
      this.scene.remove(this.wire);
      this.wire.geometry.dispose();
    }
    if (this.state.positions === null) return;

    const geometry = new THREE.BufferGeometry();
    geometry.setAttribute(
      "position",
      new THREE.BufferAttribute(Float32Array.from(this.state.positions), 3),
    );
    geometry.setIndex(new THREE.BufferAttribute(Uint32Array.from(this.state.triangles), 1));
    geometry.computeVertexNormals();
    const material = new THREE.MeshStandardMaterial({
      color: 0xb9c4d6,
      metalness: 0.05,
      roughness: 0.75,
      side: THREE.DoubleSide,
      flatShading: false,
    });
    this.mesh = new THREE.Mesh(geometry, material);
    this.scene.add(this.mesh);

    this.wire = new THREE.LineSegments(
      new THREE.WireframeGeometry(geometry),
      new THREE.LineBasicMaterial({ color: 0x2a3345, transparent: true, opacity: 0.25 }),
    );
    this.scene.add(this.wire);

    geometry.computeBoundingSphere();
    const sphere = geometry.boundingSphere;
    if (sphere) {
      this.markerRadius = Math.max(sphere.radius / 60, 1e-6);
      this.controls.target.copy(sphere.center);
      const distance = sphere.radius * 2.8;
      this.camera.position
        .copy(sphere.center)
        .add(new THREE.Vector3(0.4, 0.25, 1).normalize().multiplyScalar(distance));
      this.camera.near = sphere.radius / 100;
      this.camera.far = sphere.radius * 100;
      this.camera.updateProjectionMatrix();
    }
    this.updateMarkers();
    this.updateSelection();
  }

  private updatePositions(): void {
    if (!this.mesh || this.state.positions === null) return;
    const attr = this.mesh.geometry.getAttribute("position") as THREE.BufferAttribute;
    if (attr.count * 3 !== this.state.positions.length) {
      this.rebuildMesh();
      return;
    }
    (attr.array as Float32Array).set(this.state.positions);
    attr.needsUpdate = true;
    this.mesh.geometry.computeVertexNormals();
    if (this.wire) {
      this.wire.geometry.dispose();
      this.wire.geometry = new THREE.WireframeGeometry(this.mesh.geometry);
    }
  }

  private sphere(color: number, position: Vec3, scale = 1): THREE.Mesh {
    const marker = new THREE.Mesh(
      new THREE.SphereGeometry(this.markerRadius * scale, 12, 10),
      new THREE.MeshBasicMaterial({ color }),
    );
    marker.position.set(position[0], position[1], position[2]);
    return marker;
  }

  private line(from: Vec3, to: Vec3, color: number): THREE.Line {
    const geometry = new THREE.BufferGeometry().setFromPoints([
      new THREE.Vector3(...from),
      new THREE.Vector3(...to),
    ]);
    return new THREE.Line(geometry, new THREE.LineBasicMaterial({ color }));
  }

  /** Markers mirror the observation list plus any staged (uncommitted) drag. */
  private updateMarkers(): void {
    this.markers.clear();
    if (this.state.positions === null) return;
    for (const obs of this.state.observations) {
      if (obs.kind === "pinned") {
        this.markers.add(this.sphere(COLOR_ORIGINAL, obs.target, 1.2));
      } else {
        const current = this.state.vertexPosition(obs.vertex_id);
        this.markers.add(this.sphere(COLOR_ORIGINAL, current));
        this.markers.add(this.sphere(COLOR_TARGET, obs.target));
        this.markers.add(this.line(current, obs.target, COLOR_TARGET));
      }
    }
    const staged = this.state.staged;
    if (staged) {
      this.markers.add(this.sphere(COLOR_ORIGINAL, staged.original));
      this.markers.add(this.sphere(COLOR_TARGET, staged.target, 1.2));
      this.markers.add(this.line(staged.original, staged.target, COLOR_TARGET));
    }
  }

  private updateSelection(): void {
    const position = this.state.gizmoPosition;
    this.selectionMarker.visible = position !== null;
    if (position) {
      this.selectionMarker.position.set(position[0], position[1], position[2]);
      this.selectionMarker.scale.setScalar(this.markerRadius * 1.5);
    }
  }

  /** Ray through a pointer event, in world coordinates. */
  rayFromPointer(event: { clientX: number; clientY: number }): { origin: Vec3; direction: Vec3 } {
    const rect = this.canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1,
    );
    const raycaster = new THREE.Raycaster();
    raycaster.setFromCamera(ndc, this.camera);
    const o = raycaster.ray.origin;
    const d = raycaster.ray.direction.normalize();
    return { origin: [o.x, o.y, o.z], direction: [d.x, d.y, d.z] };
  }
}
