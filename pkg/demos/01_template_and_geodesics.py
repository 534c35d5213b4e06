"""Template meshes, edge-graph geodesics, and the brush cache.

Builds the desk-scale icosphere template and the canonical-size body
template, computes geodesic distances and brush neighborhoods, and writes
a distance-colored PLY you can open in any mesh viewer.
"""

from pathlib import Path

import numpy as np

from contactkit.mesh import (
    build_edge_graph,
    geodesic_distances,
    geodesic_neighborhood,
    make_template,
    precompute_brush_cache,
    save_brush_cache,
    save_ply,
)

out = Path("demo_output/01_geodesics")
out.mkdir(parents=True, exist_ok=True)

# A desk-scale template: subdivided icosphere, 642 vertices, 24 synthetic parts.
mesh = make_template("icosphere", num_parts=24, subdivisions=3)
graph = build_edge_graph(mesh)
print(f"template: {mesh.num_vertices} vertices, {len(mesh.triangles)} triangles, "
      f"{graph.num_edges} edges, {mesh.num_parts} parts")
print(f"Euler characteristic V - E + F = "
      f"{mesh.num_vertices - graph.num_edges + len(mesh.triangles)}")

# Geodesic distance field from one vertex, written as vertex colors.
d = geodesic_distances(graph, [0])
print(f"distances from vertex 0: min {d.min():.3f} m, max {d.max():.3f} m")
save_ply(mesh, out / "distance_field.ply", vertex_colors=d / d.max())
print(f"wrote {out / 'distance_field.ply'}")

# Brush neighborhoods grow monotonically with the radius.
for radius in (0.0, 0.1, 0.2, 0.4):
    nb = geodesic_neighborhood(graph, 0, radius)
    print(f"brush radius {radius:4.2f} m -> {len(nb):4d} vertices")

# The annotation tool precomputes all neighborhoods once and caches them.
cache = precompute_brush_cache(graph, [0.0, 0.1, 0.2])
save_brush_cache(cache, out / "brush_cache.json")
print(f"cached {len(cache.neighborhoods)} neighborhoods "
      f"({len(cache.radii)} radii x {mesh.num_vertices} vertices)")

# The canonical full-body template has the canonical vertex and part counts.
body = make_template("body")
print(f"canonical body template: {body.num_vertices} vertices, {body.num_parts} parts")
