"""Deterministic synthetic scenes with exact geometric contact ground truth.

World frame: x right, y up, z away from the camera (larger z = farther).
The camera is weak-perspective: normalized u = s*x + t_x, v = s*y + t_y,
mapped affinely to pixels with the y-down image convention. A sample is a
flat-shaded rendering of a part-colored body above a ground slab (plus
optional box props), with per-vertex contact computed by exact point-to-
triangle distance against the scene.
"""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.ndimage import binary_dilation

from . import contact_data
from .mesh import make_template

DEFAULT_CONTACT_THRESHOLD = 0.02  # meters; SDF-style datasets use this order


@dataclass(frozen=True)
class Camera:
    """Weak-perspective camera: scale s, 2D translation t, image size (H, W)."""

    scale: float
    t: tuple
    image_size: tuple

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("camera scale must be > 0")
        h, w = self.image_size
        if h < 8 or w < 8:
            raise ValueError("image size must be at least 8x8")
        object.__setattr__(self, "t", (float(self.t[0]), float(self.t[1])))
        object.__setattr__(self, "image_size", (int(h), int(w)))


def weak_perspective_normalized(vertices, camera):
    """Normalized image coordinates (u, v) = s*(x, y) + t; z passed through."""
    v = np.asarray(vertices, dtype=np.float64)
    uv = camera.scale * v[:, :2] + np.asarray(camera.t)
    return uv, v[:, 2].copy()


def project_weak_perspective(vertices, camera):
    """Project to pixel coordinates (y down); returns ((N, 2) pixels, depth z).

    Normalized [-1, 1] maps to pixel centers [0, W-1] x [0, H-1]; +v (world
    up) maps to smaller row indices.
    """
    uv, z = weak_perspective_normalized(vertices, camera)
    h, w = camera.image_size
    px = (uv[:, 0] + 1.0) * 0.5 * (w - 1)
    py = (1.0 - uv[:, 1]) * 0.5 * (h - 1)
    return np.stack([px, py], axis=1), z


@dataclass(frozen=True)
class PosedBody:
    """Posed template vertices in world frame; provenance is opaque."""

    vertices: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3 or not np.isfinite(v).all():
            raise ValueError("body vertices must be finite (N, 3)")
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)


@dataclass(frozen=True)
class SceneGeometry:
    """Scene triangle meshes with object labels; first mesh is the ground."""

    meshes: tuple  # of (vertices, triangles)
    labels: tuple  # object label per mesh
    supporting: tuple = None  # True where the mesh supports the body (ground, platforms)

    def __post_init__(self):
        if not self.meshes:
            raise ValueError("scene needs at least one mesh (the ground)")
        meshes = tuple(
            (np.asarray(v, dtype=np.float64), np.asarray(t, dtype=np.int64))
            for v, t in self.meshes
        )
        object.__setattr__(self, "meshes", meshes)
        object.__setattr__(self, "labels", tuple(self.labels))
        sup = self.supporting
        if sup is None:
            sup = tuple(lab == "ground" for lab in self.labels)
        object.__setattr__(self, "supporting", tuple(bool(s) for s in sup))
        if not (len(meshes) == len(self.labels) == len(self.supporting)):
            raise ValueError("meshes, labels, supporting must align")


def box_mesh(center, size):
    """Axis-aligned box as 12 triangles."""
    cx, cy, cz = center
    sx, sy, sz = np.asarray(size) / 2.0
    corners = np.array(
        [
            [cx - sx, cy - sy, cz - sz], [cx + sx, cy - sy, cz - sz],
            [cx + sx, cy + sy, cz - sz], [cx - sx, cy + sy, cz - sz],
            [cx - sx, cy - sy, cz + sz], [cx + sx, cy - sy, cz + sz],
            [cx + sx, cy + sy, cz + sz], [cx - sx, cy + sy, cz + sz],
        ]
    )
    quads = [
        (0, 1, 2, 3), (5, 4, 7, 6), (4, 0, 3, 7), (1, 5, 6, 2), (3, 2, 6, 7), (4, 5, 1, 0),
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [[a, b, c], [a, c, d]]
    return corners, np.asarray(tris, dtype=np.int64)


def ground_slab(top_y=0.0, thickness=0.3, half_extent=6.0, z_center=4.0, z_depth=3.0):
    return box_mesh(
        (0.0, top_y - thickness / 2.0, z_center), (2 * half_extent, thickness, z_depth)
    )


# ---------------------------------------------------------------------------
# exact point-to-triangle distance and geometric contact


def point_triangle_distances(points, tri_vertices, chunk=4096):
    """Min distance from each point to any of the triangles (exact, vectorized).

    points: (V, 3); tri_vertices: (T, 3, 3). Returns (V,) distances.
    """
    p = np.asarray(points, dtype=np.float64)
    tv = np.asarray(tri_vertices, dtype=np.float64)
    best = np.full(len(p), np.inf)
    for start in range(0, len(tv), chunk):
        t = tv[start : start + chunk]
        d = _point_triangle_block(p, t[:, 0], t[:, 1], t[:, 2])
        best = np.minimum(best, d.min(axis=1))
    return best


def _point_triangle_block(p, a, b, c):
    """Pairwise point-triangle distances, (V, T). Ericson's region walk."""
    ab = b - a
    ac = c - a
    ap = p[:, None, :] - a[None, :, :]
    d1 = np.einsum("tk,vtk->vt", ab, ap)
    d2 = np.einsum("tk,vtk->vt", ac, ap)
    bp = p[:, None, :] - b[None, :, :]
    d3 = np.einsum("tk,vtk->vt", ab, bp)
    d4 = np.einsum("tk,vtk->vt", ac, bp)
    cp = p[:, None, :] - c[None, :, :]
    d5 = np.einsum("tk,vtk->vt", ab, cp)
    d6 = np.einsum("tk,vtk->vt", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    closest = np.empty(d1.shape + (3,))
    assigned = np.zeros(d1.shape, dtype=bool)

    def take(mask, value):
        m = mask & ~assigned
        closest[m] = value[m] if value.shape == closest.shape else np.broadcast_to(value, closest.shape)[m]
        assigned[m] = True

    take((d1 <= 0) & (d2 <= 0), np.broadcast_to(a[None, :, :], closest.shape))
    take((d3 >= 0) & (d4 <= d3), np.broadcast_to(b[None, :, :], closest.shape))
    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
    take((vc <= 0) & (d1 >= 0) & (d3 <= 0), a[None] + v_ab[..., None] * ab[None])
    take((d6 >= 0) & (d5 <= d6), np.broadcast_to(c[None, :, :], closest.shape))
    with np.errstate(divide="ignore", invalid="ignore"):
        w_ac = d2 / (d2 - d6)
    take((vb <= 0) & (d2 >= 0) & (d6 <= 0), a[None] + w_ac[..., None] * ac[None])
    with np.errstate(divide="ignore", invalid="ignore"):
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    take(
        (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
        b[None] + w_bc[..., None] * (c - b)[None],
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / (va + vb + vc)
        v_f = vb * denom
        w_f = vc * denom
    take(
        np.ones_like(assigned),
        a[None] + v_f[..., None] * ab[None] + w_f[..., None] * ac[None],
    )
    return np.linalg.norm(p[:, None, :] - closest, axis=2)


def geometric_contact(body, scene, threshold=DEFAULT_CONTACT_THRESHOLD):
    """Binary contact: vertex within ``threshold`` meters of any scene triangle.

    The thresholded-distance baseline: given recovered body and scene
    geometry, contact is recovered purely geometrically.
    """
    if threshold <= 0:
        raise ValueError("threshold must be > 0")
    d = scene_distances(body, scene)
    return (d <= threshold).astype(np.float64)


def scene_distances(body, scene):
    """Min distance (meters) from each body vertex to the whole scene."""
    best = np.full(len(body.vertices), np.inf)
    for v, t in scene.meshes:
        best = np.minimum(best, point_triangle_distances(body.vertices, v[t]))
    return best


def per_mesh_contact_sets(body, scene, threshold):
    """Contact vertex ids per scene mesh, in scene order."""
    sets = []
    for v, t in scene.meshes:
        d = point_triangle_distances(body.vertices, v[t])
        sets.append(np.flatnonzero(d <= threshold))
    return sets


# ---------------------------------------------------------------------------
# flat-shaded z-buffer rasterizer


def _hsv_to_rgb(h, s, v):
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    return [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]


def palette(n, s=0.65, v=0.9, offset=0.0):
    """n visually distinct colors, deterministic (golden-ratio hue steps)."""
    colors = []
    h = offset
    for _ in range(n):
        colors.append(_hsv_to_rgb(h % 1.0, s, v))
        h += 0.61803398875
    return np.asarray(colors)


_LIGHT = np.array([0.3, 0.8, -0.5]) / np.linalg.norm([0.3, 0.8, -0.5])


def _rasterize_mesh(pixels, z, triangles, tri_colors, pixel_labels_tri, image, zbuf, label_map):
    """Z-buffered fill of projected triangles into image/label buffers.

    pixel_labels_tri gives, per triangle, the 3 per-vertex labels used for
    max-barycentric label assignment inside the triangle.
    """
    h, w = label_map.shape
    for k, tri in enumerate(triangles):
        p0, p1, p2 = pixels[tri[0]], pixels[tri[1]], pixels[tri[2]]
        area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
        if abs(area) < 1e-12:
            continue
        xmin = max(int(np.floor(min(p0[0], p1[0], p2[0]))), 0)
        xmax = min(int(np.ceil(max(p0[0], p1[0], p2[0]))), w - 1)
        ymin = max(int(np.floor(min(p0[1], p1[1], p2[1]))), 0)
        ymax = min(int(np.ceil(max(p0[1], p1[1], p2[1]))), h - 1)
        if xmin > xmax or ymin > ymax:
            continue
        xs = np.arange(xmin, xmax + 1)
        ys = np.arange(ymin, ymax + 1)
        gx, gy = np.meshgrid(xs, ys)
        # barycentric weights via edge functions; area sign handles both windings
        l2 = ((p1[0] - p0[0]) * (gy - p0[1]) - (gx - p0[0]) * (p1[1] - p0[1])) / area
        l1 = ((gx - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (gy - p0[1])) / area
        l0 = 1.0 - l1 - l2
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue
        depth = l0 * z[tri[0]] + l1 * z[tri[1]] + l2 * z[tri[2]]
        win = inside & (depth < zbuf[ymin : ymax + 1, xmin : xmax + 1])
        if not win.any():
            continue
        zbuf[ymin : ymax + 1, xmin : xmax + 1][win] = depth[win]
        image[ymin : ymax + 1, xmin : xmax + 1][win] = tri_colors[k]
        labs = pixel_labels_tri[k]
        dominant = np.argmax(np.stack([l0, l1, l2]), axis=0)
        lab_grid = np.asarray(labs)[dominant]
        label_map[ymin : ymax + 1, xmin : xmax + 1][win] = lab_grid[win]


def render_flat(scene, body, camera, part_labels, num_parts, vocabulary):
    """Flat-shaded rendering plus z-buffered label masks.

    Returns (image (H,W,3) in [0,1], scene_mask (H,W) with 0=background and
    1..len(vocabulary) per object label, part_mask (H,W) with 0=background
    and 1..num_parts per body part).
    """
    h, w = camera.image_size
    image = np.full((h, w, 3), 0.93)
    zbuf = np.full((h, w), np.inf)
    scene_mask = np.zeros((h, w), dtype=np.int64)
    part_mask = np.zeros((h, w), dtype=np.int64)

    obj_colors = palette(max(len(vocabulary), 1), s=0.35, v=0.75, offset=0.13)
    for (verts, tris), label in zip(scene.meshes, scene.labels):
        pix, z = project_weak_perspective(verts, camera)
        vocab_id = vocabulary.index(label) + 1
        colors = _shade(verts, tris, obj_colors[vocab_id - 1])
        _rasterize_mesh(
            pix, z, tris, colors, np.full((len(tris), 3), vocab_id), image, zbuf, scene_mask
        )

    if body is not None:
        part_colors = palette(num_parts, s=0.8, v=0.95, offset=0.52)
        pix, z = project_weak_perspective(body.vertices, camera)
        mesh_labels = np.asarray(part_labels, dtype=np.int64)
        tris = body.provenance["triangles"]
        base = part_colors[mesh_labels[tris[:, 0]]]
        colors = _shade(body.vertices, tris, base)
        _rasterize_mesh(
            pix, z, tris, colors, (mesh_labels[tris] + 1), image, zbuf, part_mask
        )
        # the body occludes scene labels wherever it won the z-test
        scene_mask[part_mask > 0] = 0
    return image, scene_mask, part_mask


def _shade(verts, tris, base_color):
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)
    shade = 0.55 + 0.45 * np.abs(n @ _LIGHT)
    return np.clip(np.atleast_2d(base_color) * shade[:, None], 0.0, 1.0)


def contact_mask_2d(body, contact, camera, dilate_px=1):
    """Binary H x W mask: ground-truth contact vertices splatted to pixels.

    Each contact vertex inside the view marks its nearest pixel; the result
    is dilated by ``dilate_px`` (disc structuring element).
    """
    h, w = camera.image_size
    mask = np.zeros((h, w), dtype=bool)
    ids = np.flatnonzero(np.asarray(contact) > 0)
    if ids.size:
        pix, _ = project_weak_perspective(body.vertices[ids], camera)
        px = np.rint(pix[:, 0]).astype(np.int64)
        py = np.rint(pix[:, 1]).astype(np.int64)
        keep = (px >= 0) & (px < w) & (py >= 0) & (py < h)
        mask[py[keep], px[keep]] = True
        if dilate_px > 0 and mask.any():
            r = int(dilate_px)
            yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
            mask = binary_dilation(mask, structure=(xx * xx + yy * yy) <= r * r)
    return mask.astype(np.float64)


# ---------------------------------------------------------------------------
# sample generation


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the synthetic sample family. A pure value: same config and
    seed always produce the same sample."""

    template_kind: str = "icosphere"
    template_subdivisions: int = 3
    num_parts: int = 24
    image_size: tuple = (64, 64)
    vocabulary: tuple = contact_data.DEFAULT_VOCABULARY
    contact_threshold: float = DEFAULT_CONTACT_THRESHOLD
    ground_contact_prob: float = 0.75
    platform_prob: float = 0.35  # supported by a box instead of the ground
    decor_prob: float = 0.4  # extra box prop that the body never touches
    num_yaw_bins: int = 12
    num_tilt_bins: int = 12  # which body direction faces the support
    float_gap_range: tuple = (0.15, 0.45)
    body_squash_range: tuple = (0.85, 1.15)
    camera_scale_range: tuple = (0.75, 0.95)
    camera_jitter: float = 0.05
    mask_dilate_px: int = 1

    def template(self):
        return make_template(
            kind=self.template_kind,
            num_parts=self.num_parts,
            subdivisions=self.template_subdivisions,
        )


@dataclass(frozen=True)
class SynthSample:
    image: np.ndarray
    body: PosedBody
    scene: SceneGeometry
    camera: Camera
    gt_contact: np.ndarray
    gt_scene_mask: np.ndarray
    gt_part_mask: np.ndarray
    gt_contact_mask_2d: np.ndarray
    record: contact_data.ContactRecord


def _yaw_matrix(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rotation_between(a, b):
    """Rotation matrix taking unit vector a to unit vector b (Rodrigues)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    v = np.cross(a, b)
    c = float(np.dot(a, b))
    if np.linalg.norm(v) < 1e-12:
        if c > 0:
            return np.eye(3)
        # antiparallel: rotate pi around any axis orthogonal to a
        axis = np.cross(a, [1.0, 0.0, 0.0])
        if np.linalg.norm(axis) < 1e-6:
            axis = np.cross(a, [0.0, 0.0, 1.0])
        axis /= np.linalg.norm(axis)
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def tilt_directions(n):
    """n fixed unit directions spread over the sphere (golden spiral)."""
    k = np.arange(n)
    y = 1.0 - 2.0 * (k + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    phi = np.pi * (1.0 + np.sqrt(5.0)) * k
    return np.stack([r * np.cos(phi), y, r * np.sin(phi)], axis=1)


def generate_sample(seed, config, template=None):
    """One synthetic sample, a pure function of (seed, config).

    The body (part-colored template) is yawed, squashed, and either rested
    on a support (ground slab or box platform) or floated above it; contact
    ground truth comes from exact geometric distance at the configured
    threshold, and all 2D channels are rendered consistently.
    """
    rng = np.random.default_rng(seed)
    mesh = template if template is not None else config.template()

    yaw = 2.0 * np.pi * rng.integers(config.num_yaw_bins) / config.num_yaw_bins
    tilt_idx = int(rng.integers(config.num_tilt_bins))
    down = tilt_directions(config.num_tilt_bins)[tilt_idx]
    squash = rng.uniform(*config.body_squash_range)
    # tilt the chosen body direction to face the support, then yaw and squash
    align = _rotation_between(down, np.array([0.0, -1.0, 0.0]))
    verts = mesh.vertices @ (_yaw_matrix(yaw) @ align).T
    verts = verts * np.array([1.0, squash, 1.0])

    grounded = rng.random() < config.ground_contact_prob
    on_platform = grounded and rng.random() < config.platform_prob
    x_off = rng.uniform(-0.25, 0.25)
    z_off = rng.uniform(3.5, 4.5)

    body_min_y = verts[:, 1].min()
    meshes = [ground_slab(z_center=z_off + 1.0)]
    labels = ["ground"]
    supporting = [True]
    if on_platform:
        box_h = rng.uniform(0.15, 0.35)
        box = box_mesh((x_off, box_h / 2.0, z_off), (0.8, box_h, 0.8))
        meshes.append(box)
        labels.append("box")
        supporting.append(True)
        rest_y = box_h
    else:
        rest_y = 0.0
    if rng.random() < config.decor_prob:
        side = 1.0 if rng.random() < 0.5 else -1.0
        decor_size = rng.uniform(0.25, 0.45)
        meshes.append(
            box_mesh((x_off + side * 1.3, decor_size / 2.0, z_off), [decor_size] * 3)
        )
        labels.append("box")
        supporting.append(False)
    if grounded:
        lift = rest_y - body_min_y
    else:
        lift = rest_y - body_min_y + rng.uniform(*config.float_gap_range)
    verts = verts + np.array([x_off, lift, z_off])

    body = PosedBody(
        vertices=verts,
        provenance={
            "seed": int(seed),
            "yaw": float(yaw),
            "tilt_idx": tilt_idx,
            "squash": float(squash),
            "grounded": bool(grounded),
            "triangles": mesh.triangles,
        },
    )
    scene = SceneGeometry(meshes=tuple(meshes), labels=tuple(labels), supporting=tuple(supporting))

    scale = rng.uniform(*config.camera_scale_range)
    center = verts.mean(axis=0)
    jitter = rng.uniform(-config.camera_jitter, config.camera_jitter, size=2)
    camera = Camera(
        scale=scale,
        t=(-scale * center[0] + jitter[0], -scale * center[1] + jitter[1]),
        image_size=config.image_size,
    )

    gt_contact = geometric_contact(body, scene, config.contact_threshold)
    image, scene_mask, part_mask = render_flat(
        scene, body, camera, mesh.part_labels, mesh.num_parts, config.vocabulary
    )
    mask2d = contact_mask_2d(body, gt_contact, camera, config.mask_dilate_px)

    contact_sets = per_mesh_contact_sets(body, scene, config.contact_threshold)
    by_label = {}
    scene_supported = []
    for ids, label, sup in zip(contact_sets, scene.labels, scene.supporting):
        if label != "ground" and ids.size:
            by_label.setdefault(label, []).append(ids)
        if sup:
            scene_supported.append(ids)
    record = contact_data.ContactRecord(
        image_id=f"synth_{seed:06d}",
        image_path=f"images/synth_{seed:06d}.png",
        object_contacts=tuple(
            (label, np.concatenate(chunks)) for label, chunks in by_label.items()
        ),
        scene_supported=np.concatenate(scene_supported) if scene_supported else [],
    )

    return SynthSample(
        image=image,
        body=body,
        scene=scene,
        camera=camera,
        gt_contact=gt_contact,
        gt_scene_mask=scene_mask,
        gt_part_mask=part_mask,
        gt_contact_mask_2d=mask2d,
        record=record,
    )


def write_synthetic_dataset(config, count, out_dir, seed=0, splits=None,
                            without_3d_every=0):
    """Generate ``count`` samples and write a dataset directory.

    Layout: contact annotation schema (index.json + annotations/) plus
    images/<id>.png and aux/<id>.npz holding the camera, posed body, and
    ground-truth masks that training consumes.

    ``without_3d_every=k`` marks every k-th record as carrying only the 2D
    contact mask (aux ``has_contact_3d=False``): training then skips the
    3D contact loss for it and supervises its contact head through the
    pixel-anchoring loss alone, mirroring image sets that have 2D contact
    annotations but no vertex labels.
    """
    from PIL import Image

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "aux").mkdir(parents=True, exist_ok=True)
    template = config.template()
    records = []
    for k in range(count):
        sample = generate_sample(seed + k, config, template=template)
        records.append(sample.record)
        img8 = np.clip(np.rint(sample.image * 255), 0, 255).astype(np.uint8)
        Image.fromarray(img8).save(out / sample.record.image_path)
        has_3d = not (without_3d_every and (k + 1) % without_3d_every == 0)
        np.savez(
            out / "aux" / f"{sample.record.image_id}.npz",
            body_vertices=sample.body.vertices,
            camera_scale=sample.camera.scale,
            camera_t=np.asarray(sample.camera.t),
            gt_contact=sample.gt_contact,
            gt_scene_mask=sample.gt_scene_mask,
            gt_part_mask=sample.gt_part_mask,
            gt_contact_mask_2d=sample.gt_contact_mask_2d,
            has_contact_3d=has_3d,
        )
    if splits is None:
        splits = {"train": [r.image_id for r in records]}
    dataset = contact_data.ContactDataset(
        records=tuple(records),
        template_ref=f"{config.template_kind}:{config.template_subdivisions}:{config.num_parts}",
        num_vertices=template.num_vertices,
        vocabulary=config.vocabulary,
        splits=splits,
    )
    contact_data.save_dataset(dataset, out)
    (out / "synth_config.json").write_text(
        json.dumps(_config_to_json(config), indent=2, sort_keys=True) + "\n"
    )
    return dataset


def _config_to_json(config):
    d = asdict(config)
    d = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}
    return d


def config_from_json(payload):
    kwargs = dict(payload)
    for key in (
        "image_size", "vocabulary", "float_gap_range", "body_squash_range", "camera_scale_range",
    ):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return SynthConfig(**kwargs)


def load_aux(dataset_dir, image_id):
    """Load the auxiliary arrays for one record of a synthetic dataset."""
    with np.load(Path(dataset_dir) / "aux" / f"{image_id}.npz") as z:
        return {k: z[k] for k in z.files}
