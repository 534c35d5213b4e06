/**
 * CPU ray casting against the template mesh: Moller-Trumbore intersection
 * with backface culling, snapping to the nearest vertex of the hit triangle.
 * Kept free of three.js so the picking rule is unit-testable.
 */

export type Vec3 = readonly [number, number, number];

export interface PickHit {
  triangle: number;
  distance: number;
  point: Vec3;
  vertex: number;
}

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const dot = (a: Vec3, b: Vec3): number => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

/**
 * Ray/triangle intersection distance, or null. Front-facing only: triangles
 * wound counter-clockwise as seen from the ray origin (det > 0).
 */
export function rayTriangle(
  origin: Vec3,
  dir: Vec3,
  a: Vec3,
  b: Vec3,
  c: Vec3,
): number | null {
  const e1 = sub(b, a);
  const e2 = sub(c, a);
  const p = cross(dir, e2);
  const det = dot(e1, p);
  if (det < 1e-12) return null; // backface or parallel
  const inv = 1 / det;
  const t = sub(origin, a);
  const u = dot(t, p) * inv;
  if (u < 0 || u > 1) return null;
  const q = cross(t, e1);
  const v = dot(dir, q) * inv;
  if (v < 0 || u + v > 1) return null;
  const dist = dot(e2, q) * inv;
  return dist > 1e-9 ? dist : null;
}

/**
 * Nearest front-facing hit along the ray, snapped to the closest vertex of
 * the hit triangle; null when the ray misses the mesh.
 */
export function pickVertex(
  origin: Vec3,
  dir: Vec3,
  vertices: ArrayLike<number>,
  triangles: ArrayLike<number>,
): PickHit | null {
  const vertex = (i: number): Vec3 => [
    vertices[3 * i], vertices[3 * i + 1], vertices[3 * i + 2],
  ];
  let best: { triangle: number; distance: number } | null = null;
  for (let t = 0; t < triangles.length / 3; t++) {
    const d = rayTriangle(
      origin, dir,
      vertex(triangles[3 * t]), vertex(triangles[3 * t + 1]), vertex(triangles[3 * t + 2]),
    );
    if (d !== null && (best === null || d < best.distance)) {
      best = { triangle: t, distance: d };
    }
  }
  if (!best) return null;
  const point: Vec3 = [
    origin[0] + dir[0] * best.distance,
    origin[1] + dir[1] * best.distance,
    origin[2] + dir[2] * best.distance,
  ];
  let snapped = -1;
  let snapDist = Infinity;
  for (const idx of [0, 1, 2].map((k) => triangles[3 * best!.triangle + k])) {
    const v = vertex(idx);
    const d2 = (v[0] - point[0]) ** 2 + (v[1] - point[1]) ** 2 + (v[2] - point[2]) ** 2;
    if (d2 < snapDist) {
      snapDist = d2;
      snapped = idx;
    }
  }
  return { triangle: best.triangle, distance: best.distance, point, vertex: snapped };
}
