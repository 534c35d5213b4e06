import sys
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

sys.path.insert(0, str(Path(__file__).parent))

from contactkit.mesh import TemplateMesh, EdgeGraph, build_edge_graph, make_template, tetrahedron


@pytest.fixture
def tetra_mesh():
    v, t = tetrahedron(edge_length=1.0)
    return TemplateMesh(vertices=v, triangles=t, part_labels=[0, 0, 1, 1], num_parts=2)


@pytest.fixture
def tetra_graph(tetra_mesh):
    return build_edge_graph(tetra_mesh)


@pytest.fixture(scope="session")
def icosphere_template():
    return make_template("icosphere", num_parts=24, subdivisions=2)  # 162 vertices


@pytest.fixture(scope="session")
def icosphere_graph(icosphere_template):
    return build_edge_graph(icosphere_template)


def path_graph(n, length=1.0):
    """Chain 0-1-...-(n-1) with uniform edge lengths."""
    i = np.arange(n - 1)
    j = i + 1
    data = np.full(n - 1, float(length))
    w = sparse.coo_matrix(
        (np.concatenate([data, data]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(n, n),
    ).tocsr()
    return EdgeGraph(weights=w)


@pytest.fixture
def path3_graph():
    return path_graph(3)
