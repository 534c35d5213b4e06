"""Triangle-mesh template, edge-graph geodesics, and brush neighborhoods.

All contact labels in this package live on the vertices of a single template
mesh. This module owns that template: loading/validating it, segmenting it
into body parts, and the shortest-path machinery (distances, neighborhoods,
precomputed brush caches) that the annotation tool and the metrics share.

Units are meters everywhere; conversion to centimeters happens only when
metrics are reported.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, dijkstra

# Vertex/part counts of the canonical full-body template.
CANONICAL_VERTEX_COUNT = 6890
CANONICAL_PART_COUNT = 24


class MeshError(ValueError):
    """Raised for malformed mesh files or invalid mesh structure."""


def _freeze(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TemplateMesh:
    """Canonical body template: vertices, triangles, per-vertex part labels.

    Parameters
    ----------
    vertices : (N_V, 3) float array, meters
    triangles : (T, 3) int array, indices into vertices
    part_labels : (N_V,) int array, values in [0, num_parts)
    num_parts : int
    """

    vertices: np.ndarray
    triangles: np.ndarray
    part_labels: np.ndarray
    num_parts: int

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        labels = np.ascontiguousarray(self.part_labels, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must be (N, 3)")
        if not np.isfinite(v).all():
            raise MeshError("vertices contain non-finite coordinates")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must be (T, 3); non-triangle meshes unsupported")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        if labels.shape != (len(v),):
            raise MeshError("part_labels must have one entry per vertex")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_parts):
            raise MeshError("part label out of range [0, num_parts)")
        distinct = np.unique(labels).size
        if distinct != self.num_parts:
            raise MeshError(
                f"expected {self.num_parts} distinct part labels, found {distinct}"
            )
        object.__setattr__(self, "vertices", _freeze(v))
        object.__setattr__(self, "triangles", _freeze(t))
        object.__setattr__(self, "part_labels", _freeze(labels))

    @property
    def num_vertices(self):
        return len(self.vertices)

    def vertices_of_part(self, part):
        """Vertex indices labeled with the given part id (sorted)."""
        if not 0 <= part < self.num_parts:
            raise ValueError(f"unknown part id {part} (have {self.num_parts} parts)")
        return np.flatnonzero(self.part_labels == part)


@dataclass(frozen=True)
class EdgeGraph:
    """Undirected edge graph of a triangle mesh with Euclidean edge lengths.

    ``weights`` is a symmetric CSR matrix; weights[u, v] is the length in
    meters of edge (u, v). ``num_edges`` counts undirected edges.
    """

    weights: sparse.csr_matrix

    @property
    def num_vertices(self):
        return self.weights.shape[0]

    @property
    def num_edges(self):
        return self.weights.nnz // 2

    def neighbors(self, v):
        """(neighbor indices, edge lengths) of vertex v."""
        start, end = self.weights.indptr[v], self.weights.indptr[v + 1]
        return self.weights.indices[start:end], self.weights.data[start:end]


def build_edge_graph(mesh):
    """Build the undirected edge graph of a TemplateMesh.

    One entry per undirected triangle edge; length is the Euclidean distance
    between the endpoints.
    """
    t = mesh.triangles
    i = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    j = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    edges = np.unique(np.sort(np.stack([i, j], axis=1), axis=1), axis=0)
    lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
    if lengths.size and lengths.min() <= 0:
        raise MeshError("degenerate (zero-length) edge in mesh")
    n = mesh.num_vertices
    w = sparse.coo_matrix(
        (
            np.concatenate([lengths, lengths]),
            (np.concatenate([edges[:, 0], edges[:, 1]]), np.concatenate([edges[:, 1], edges[:, 0]])),
        ),
        shape=(n, n),
    ).tocsr()
    return EdgeGraph(weights=w)


def is_connected(graph):
    n_comp, _ = connected_components(graph.weights, directed=False)
    return n_comp == 1


def geodesic_distances(graph, sources):
    """Shortest-path distance (meters) from a vertex set to every vertex.

    Multi-source distances are the minimum over single-source results;
    d(v) = 0 for v in sources.
    """
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if sources.size == 0:
        raise ValueError("source set must be non-empty")
    return dijkstra(graph.weights, directed=False, indices=sources, min_only=True)


def geodesic_neighborhood(graph, center, radius):
    """Vertices within geodesic distance ``radius`` of ``center``, inclusive.

    Radius 0 returns just the center vertex.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    d = dijkstra(
        graph.weights, directed=False, indices=[center], min_only=True,
        limit=np.nextafter(radius, np.inf),
    )
    return np.flatnonzero(d <= radius)


@dataclass(frozen=True)
class BrushCache:
    """Precomputed geodesic neighborhoods for every (brush radius, vertex).

    neighborhoods maps (radius, vertex) -> sorted int64 array of vertex ids;
    the center vertex is always included.
    """

    radii: tuple
    neighborhoods: dict = field(repr=False)

    def neighborhood(self, radius, vertex):
        key = (float(radius), int(vertex))
        if key not in self.neighborhoods:
            raise KeyError(f"no cache entry for radius={radius}, vertex={vertex}")
        return self.neighborhoods[key]

    def table(self, radius):
        """All neighborhoods for one radius as a list indexed by vertex."""
        r = float(radius)
        if r not in self.radii:
            raise KeyError(f"radius {radius} not in cache (have {list(self.radii)})")
        n = 1 + max(v for (_, v) in self.neighborhoods)
        return [self.neighborhoods[(r, v)] for v in range(n)]


def precompute_brush_cache(graph, radii):
    """Compute geodesic neighborhoods for every vertex at every brush radius."""
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("radii must be non-empty")
    if min(radii) < 0:
        raise ValueError("radii must be >= 0")
    r_max = max(radii)
    neighborhoods = {}
    for v in range(graph.num_vertices):
        d = dijkstra(
            graph.weights, directed=False, indices=[v], min_only=True,
            limit=np.nextafter(r_max, np.inf),
        )
        for r in radii:
            neighborhoods[(r, v)] = _freeze(np.flatnonzero(d <= r))
    return BrushCache(radii=tuple(radii), neighborhoods=neighborhoods)


def save_brush_cache(cache, path):
    payload = {
        "radii": list(cache.radii),
        "neighborhoods": {
            repr(r): [cache.neighborhoods[(r, v)].tolist() for v in range(_cache_size(cache))]
            for r in cache.radii
        },
    }
    Path(path).write_text(json.dumps(payload))


def load_brush_cache(path):
    payload = json.loads(Path(path).read_text())
    radii = tuple(float(r) for r in payload["radii"])
    neighborhoods = {}
    for r_key, tables in payload["neighborhoods"].items():
        r = float(r_key)
        for v, ids in enumerate(tables):
            neighborhoods[(r, v)] = _freeze(np.asarray(ids, dtype=np.int64))
    return BrushCache(radii=radii, neighborhoods=neighborhoods)


def _cache_size(cache):
    return 1 + max(v for (_, v) in cache.neighborhoods)


# ---------------------------------------------------------------------------
# part segmentation


def cluster_parts(vertices, num_parts, seed=0):
    """Deterministic spatial partition of vertices into ``num_parts`` labels.

    Farthest-point sampling (started at ``seed % N``) picks initial centers,
    followed by a few Lloyd iterations. Every part is guaranteed non-empty;
    labels are renumbered by their smallest member vertex so the result is
    stable across runs.
    """
    v = np.asarray(vertices, dtype=np.float64)
    n = len(v)
    if num_parts < 1 or num_parts > n:
        raise ValueError(f"cannot split {n} vertices into {num_parts} parts")
    centers = [int(seed) % n]
    d = np.linalg.norm(v - v[centers[0]], axis=1)
    for _ in range(num_parts - 1):
        nxt = int(np.argmax(d))
        centers.append(nxt)
        d = np.minimum(d, np.linalg.norm(v - v[nxt], axis=1))
    fps_labels = np.argmin(
        np.linalg.norm(v[:, None, :] - v[centers][None, :, :], axis=2), axis=1
    )
    centroids = v[centers].copy()
    labels = fps_labels
    for _ in range(10):
        dists = np.linalg.norm(v[:, None, :] - centroids[None, :, :], axis=2)
        labels = np.argmin(dists, axis=1)
        for k in range(num_parts):
            members = v[labels == k]
            if len(members):
                centroids[k] = members.mean(axis=0)
    if np.unique(labels).size != num_parts:
        # Lloyd emptied a cluster; the FPS assignment is always a valid partition
        labels = fps_labels
    # renumber by smallest member vertex index
    order = sorted(range(num_parts), key=lambda k: int(np.flatnonzero(labels == k)[0]))
    remap = np.empty(num_parts, dtype=np.int64)
    for new, old in enumerate(order):
        remap[old] = new
    return remap[labels]


# ---------------------------------------------------------------------------
# file IO


def load_template(path, expected_parts, labels_path=None):
    """Load an ASCII OBJ/PLY triangle mesh as a validated TemplateMesh.

    Per-vertex part labels come from ``labels_path`` (one integer per line,
    one line per vertex); when omitted, a ``<stem>.labels.txt`` sidecar next
    to the mesh is used if present, and otherwise ``expected_parts`` labels
    are synthesized by deterministic spatial clustering.
    """
    path = Path(path)
    if not path.exists():
        raise MeshError(f"mesh file not found: {path}")
    if path.suffix.lower() == ".obj":
        vertices, triangles = _parse_obj(path)
    elif path.suffix.lower() == ".ply":
        vertices, triangles = _parse_ply(path)
    else:
        raise MeshError(f"unsupported mesh format: {path.suffix}")

    if labels_path is None:
        sidecar = path.with_name(path.stem + ".labels.txt")
        labels_path = sidecar if sidecar.exists() else None
    if labels_path is not None:
        labels = np.loadtxt(labels_path, dtype=np.int64, ndmin=1)
        if labels.shape != (len(vertices),):
            raise MeshError("label sidecar length does not match vertex count")
    else:
        labels = cluster_parts(vertices, expected_parts)

    mesh = TemplateMesh(
        vertices=vertices, triangles=triangles, part_labels=labels, num_parts=expected_parts
    )
    _validate_structure(mesh)
    return mesh


def _validate_structure(mesh):
    edge_use = {}
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edge_use[key] = edge_use.get(key, 0) + 1
            if a == b:
                raise MeshError("degenerate triangle with repeated vertex")
    if edge_use and max(edge_use.values()) > 2:
        raise MeshError("non-manifold mesh: an edge is shared by more than two triangles")
    if not is_connected(build_edge_graph(mesh)):
        raise MeshError("mesh edge graph is not connected")


def _parse_obj(path):
    vertices, triangles = [], []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshError(f"{path}:{lineno}: malformed vertex line")
            vertices.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            if len(idx) != 3:
                raise MeshError(f"{path}:{lineno}: only triangle faces are supported")
            triangles.append([i - 1 if i > 0 else len(vertices) + i for i in idx])
    if not vertices or not triangles:
        raise MeshError(f"{path}: no triangle mesh content found")
    return np.asarray(vertices, dtype=np.float64), np.asarray(triangles, dtype=np.int64)


def _parse_ply(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshError(f"{path}: not a PLY file")
    n_vert = n_face = None
    vertex_props = []
    element = None
    i = 1
    ascii_fmt = False
    while i < len(lines):
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        if parts[0] == "format":
            ascii_fmt = parts[1] == "ascii"
        elif parts[0] == "element":
            element = parts[1]
            if element == "vertex":
                n_vert = int(parts[2])
            elif element == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and element == "vertex" and parts[1] != "list":
            vertex_props.append(parts[2])
        elif parts[0] == "end_header":
            break
    else:
        raise MeshError(f"{path}: missing end_header")
    if not ascii_fmt:
        raise MeshError(f"{path}: only ASCII PLY is supported")
    if n_vert is None or n_face is None:
        raise MeshError(f"{path}: missing vertex or face element")
    try:
        xyz = [vertex_props.index(c) for c in ("x", "y", "z")]
    except ValueError:
        raise MeshError(f"{path}: vertex element lacks x/y/z properties") from None
    vertices = np.empty((n_vert, 3), dtype=np.float64)
    for k in range(n_vert):
        vals = lines[i + k].split()
        vertices[k] = [float(vals[c]) for c in xyz]
    i += n_vert
    triangles = np.empty((n_face, 3), dtype=np.int64)
    for k in range(n_face):
        vals = [int(x) for x in lines[i + k].split()]
        if vals[0] != 3:
            raise MeshError(f"{path}: only triangle faces are supported")
        triangles[k] = vals[1:4]
    return vertices, triangles


def save_obj(mesh_or_vt, path):
    """Write vertices/triangles as ASCII OBJ. Accepts a TemplateMesh or (v, t)."""
    v, t = _as_vt(mesh_or_vt)
    with open(path, "w") as f:
        for p in v:
            f.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for tri in t:
            f.write(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}\n")


def save_labels(labels, path):
    Path(path).write_text("\n".join(str(int(x)) for x in labels) + "\n")


def save_ply(mesh_or_vt, path, vertex_colors=None):
    """Write an ASCII PLY, optionally with per-vertex uchar RGB colors.

    ``vertex_colors`` may be float RGB in [0, 1] (N, 3) or a scalar per
    vertex in [0, 1], which is mapped to a blue->red ramp.
    """
    v, t = _as_vt(mesh_or_vt)
    colors = None
    if vertex_colors is not None:
        c = np.asarray(vertex_colors, dtype=np.float64)
        if c.ndim == 1:
            c = scalar_to_rgb(c)
        colors = np.clip(np.rint(c * 255), 0, 255).astype(np.uint8)
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(v)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        if colors is not None:
            f.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        f.write(f"element face {len(t)}\n")
        f.write("property list uchar int vertex_indices\nend_header\n")
        for k, p in enumerate(v):
            row = f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}"
            if colors is not None:
                row += f" {colors[k, 0]} {colors[k, 1]} {colors[k, 2]}"
            f.write(row + "\n")
        for tri in t:
            f.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")


def scalar_to_rgb(values):
    """Map scalars in [0, 1] to a blue(0) -> red(1) color ramp."""
    x = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.stack([x, 0.2 * np.ones_like(x), 1.0 - x], axis=1)


def _as_vt(mesh_or_vt):
    if isinstance(mesh_or_vt, TemplateMesh):
        return mesh_or_vt.vertices, mesh_or_vt.triangles
    v, t = mesh_or_vt
    return np.asarray(v, dtype=np.float64), np.asarray(t, dtype=np.int64)


# ---------------------------------------------------------------------------
# procedural templates


def tetrahedron(edge_length=1.0):
    """Regular tetrahedron (vertices, triangles); the smallest closed mesh."""
    v = np.array(
        [[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64
    )
    v *= edge_length / np.sqrt(8.0)
    t = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]], dtype=np.int64)
    return v, t


def icosphere(subdivisions=2, radius=1.0):
    """Subdivided icosahedron (vertices, triangles); closed genus-0 mesh.

    Vertex counts: 12, 42, 162, 642, 2562, ... per subdivision level.
    """
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=np.float64,
    )
    t = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    for _ in range(subdivisions):
        midpoint = {}
        verts = [p for p in v]

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                verts.append((verts[a] + verts[b]) / 2.0)
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_t = []
        for a, b, c in t:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_t += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v = np.asarray(verts)
        t = np.asarray(new_t, dtype=np.int64)
    v = v / np.linalg.norm(v, axis=1, keepdims=True) * radius
    return v, t


def uv_sphere(n_rings, n_segments, radius=1.0):
    """Latitude/longitude sphere with n_rings * n_segments + 2 vertices."""
    verts = [[0.0, radius, 0.0]]
    for i in range(1, n_rings + 1):
        theta = np.pi * i / (n_rings + 1)
        for j in range(n_segments):
            phi = 2 * np.pi * j / n_segments
            verts.append(
                [
                    radius * np.sin(theta) * np.cos(phi),
                    radius * np.cos(theta),
                    radius * np.sin(theta) * np.sin(phi),
                ]
            )
    verts.append([0.0, -radius, 0.0])
    south = len(verts) - 1
    tris = []
    ring = lambda i, j: 1 + i * n_segments + (j % n_segments)
    for j in range(n_segments):
        tris.append([0, ring(0, j + 1), ring(0, j)])
    for i in range(n_rings - 1):
        for j in range(n_segments):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris += [[a, b, d], [a, d, c]]
    for j in range(n_segments):
        tris.append([south, ring(n_rings - 1, j), ring(n_rings - 1, j + 1)])
    return np.asarray(verts, dtype=np.float64), np.asarray(tris, dtype=np.int64)


def make_template(kind="icosphere", num_parts=CANONICAL_PART_COUNT, **kwargs):
    """Build a ready-to-use TemplateMesh.

    kind 'icosphere' gives a desk-scale template (642 vertices by default);
    kind 'body' gives a body-sized ellipsoid with the canonical vertex and
    part counts (6890 vertices, 24 parts).
    """
    if kind == "icosphere":
        v, t = icosphere(subdivisions=kwargs.pop("subdivisions", 3), radius=kwargs.pop("radius", 0.5))
    elif kind == "tetrahedron":
        v, t = tetrahedron(**kwargs)
    elif kind == "body":
        # 56 rings x 123 segments + 2 poles = 6890 vertices, the canonical count
        v, t = uv_sphere(56, 123, radius=0.5)
        v = v * np.array([0.45, 1.7, 0.3])  # body-like proportions, ~1.7 m tall
    else:
        raise ValueError(f"unknown template kind {kind!r}")
    labels = cluster_parts(v, num_parts)
    return TemplateMesh(vertices=v, triangles=t, part_labels=labels, num_parts=num_parts)
