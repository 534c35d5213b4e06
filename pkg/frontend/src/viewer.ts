/**
 * three.js mesh viewer: vertex-colored template, hover highlight, painted
 * selection overlay, and pointer handling routed through the CPU picker so
 * the browser uses exactly the picking rule the tests verify.
 */

import * as THREE from "three";

import { OrbitController } from "./camera.js";
import { pickVertex, Vec3 } from "./picking.js";
import { TemplatePayload } from "./api.js";

const BASE_SATURATION = 0.45;
const SELECTED = new THREE.Color(0.95, 0.15, 0.1);
const HOVERED = new THREE.Color(1.0, 0.85, 0.2);

export class MeshViewer {
  readonly renderer: THREE.WebGLRenderer;
  readonly scene = new THREE.Scene();
  readonly camera: THREE.PerspectiveCamera;
  readonly orbit: OrbitController;
  private geometry: THREE.BufferGeometry;
  private baseColors: Float32Array;
  private colors: THREE.BufferAttribute;
  private positions: Float32Array;
  private triangles: Uint32Array;
  hoverVertex: number | null = null;

  onPaint: ((vertex: number) => void) | null = null;
  onHover: ((vertex: number | null) => void) | null = null;

  constructor(canvas: HTMLCanvasElement, template: TemplatePayload) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(40, canvas.width / canvas.height, 0.01, 100);
    this.scene.background = new THREE.Color(0xf4f4f4);

    this.positions = new Float32Array(template.vertices.flat());
    this.triangles = new Uint32Array(template.triangles.flat());
    this.geometry = new THREE.BufferGeometry();
    this.geometry.setAttribute("position", new THREE.BufferAttribute(this.positions, 3));
    this.geometry.setIndex(new THREE.BufferAttribute(this.triangles, 1));
    this.geometry.computeVertexNormals();

    this.baseColors = buildPartColors(template.part_labels, template.num_parts);
    this.colors = new THREE.BufferAttribute(this.baseColors.slice(), 3);
    this.geometry.setAttribute("color", this.colors);

    const material = new THREE.MeshLambertMaterial({ vertexColors: true });
    this.scene.add(new THREE.Mesh(this.geometry, material));
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.7));
    const sun = new THREE.DirectionalLight(0xffffff, 1.2);
    sun.position.set(1, 2, 1.5);
    this.scene.add(sun);

    const bounds = new THREE.Box3().setFromBufferAttribute(
      this.geometry.getAttribute("position") as THREE.BufferAttribute,
    );
    const center = bounds.getCenter(new THREE.Vector3());
    const size = bounds.getSize(new THREE.Vector3()).length();
    this.orbit = new OrbitController(
      {
        theta: 0.5,
        phi: Math.PI / 2.2,
        radius: size * 1.6,
        target: [center.x, center.y, center.z],
      },
      { minRadius: size * 0.4, maxRadius: size * 6 },
    );
    this.applyCamera();
    this.bindPointer(canvas);
  }

  applyCamera(): void {
    const state = this.orbit.current;
    const eye = this.orbit.eye();
    this.camera.position.set(eye[0], eye[1], eye[2]);
    this.camera.lookAt(state.target[0], state.target[1], state.target[2]);
    this.camera.updateMatrixWorld();
  }

  resetCamera(): void {
    this.orbit.reset();
    this.applyCamera();
  }

  /** World-space ray through a pointer position in canvas coordinates. */
  pointerRay(clientX: number, clientY: number, rect: DOMRect): { origin: Vec3; dir: Vec3 } {
    const ndc = new THREE.Vector2(
      ((clientX - rect.left) / rect.width) * 2 - 1,
      -(((clientY - rect.top) / rect.height) * 2 - 1),
    );
    const origin = this.camera.position.clone();
    const point = new THREE.Vector3(ndc.x, ndc.y, 0.5).unproject(this.camera);
    const dir = point.sub(origin).normalize();
    return { origin: [origin.x, origin.y, origin.z], dir: [dir.x, dir.y, dir.z] };
  }

  pickAt(clientX: number, clientY: number, rect: DOMRect): number | null {
    const { origin, dir } = this.pointerRay(clientX, clientY, rect);
    const hit = pickVertex(origin, dir, this.positions, this.triangles);
    return hit ? hit.vertex : null;
  }

  setSelection(selection: ReadonlySet<number>): void {
    const array = this.colors.array as Float32Array;
    array.set(this.baseColors);
    for (const v of selection) {
      array[3 * v] = SELECTED.r;
      array[3 * v + 1] = SELECTED.g;
      array[3 * v + 2] = SELECTED.b;
    }
    if (this.hoverVertex !== null && !selection.has(this.hoverVertex)) {
      const v = this.hoverVertex;
      array[3 * v] = HOVERED.r;
      array[3 * v + 1] = HOVERED.g;
      array[3 * v + 2] = HOVERED.b;
    }
    this.colors.needsUpdate = true;
  }

  render(): void {
    this.renderer.render(this.scene, this.camera);
  }

  private bindPointer(canvas: HTMLCanvasElement): void {
    let dragging: "orbit" | "pan" | null = null;
    let painting = false;
    let last = [0, 0];

    canvas.addEventListener("pointerdown", (e) => {
      if (e.button === 0 && !e.shiftKey) painting = true;
      else if (e.button === 0 && e.shiftKey) dragging = "pan";
      else if (e.button === 2 || e.button === 1) dragging = "orbit";
      last = [e.clientX, e.clientY];
      if (painting) this.paintAt(e);
    });
    canvas.addEventListener("contextmenu", (e) => e.preventDefault());
    canvas.addEventListener("pointermove", (e) => {
      const dx = e.clientX - last[0];
      const dy = e.clientY - last[1];
      last = [e.clientX, e.clientY];
      if (dragging === "orbit") {
        this.orbit.orbit(-dx * 0.008, -dy * 0.008);
        this.applyCamera();
      } else if (dragging === "pan") {
        this.orbit.pan(-dx * 0.002, dy * 0.002);
        this.applyCamera();
      } else if (painting) {
        this.paintAt(e);
      } else {
        const v = this.pickAt(e.clientX, e.clientY, canvas.getBoundingClientRect());
        this.hoverVertex = v;
        this.onHover?.(v);
      }
    });
    const stop = () => {
      dragging = null;
      painting = false;
    };
    canvas.addEventListener("pointerup", stop);
    canvas.addEventListener("pointerleave", stop);
    canvas.addEventListener("wheel", (e) => {
      e.preventDefault();
      this.orbit.zoom(e.deltaY > 0 ? 1.1 : 1 / 1.1);
      this.applyCamera();
    });
  }

  private paintAt(e: PointerEvent): void {
    const canvas = this.renderer.domElement;
    const v = this.pickAt(e.clientX, e.clientY, canvas.getBoundingClientRect());
    if (v !== null) this.onPaint?.(v);
  }
}

export function buildPartColors(partLabels: number[], numParts: number): Float32Array {
  const colors = new Float32Array(partLabels.length * 3);
  for (let i = 0; i < partLabels.length; i++) {
    const hue = ((partLabels[i] * 0.61803398875) % 1 + 1) % 1;
    const c = new THREE.Color().setHSL(hue, BASE_SATURATION, 0.62);
    colors[3 * i] = c.r;
    colors[3 * i + 1] = c.g;
    colors[3 * i + 2] = c.b;
  }
  return colors;
}
