"""Hypothesis strategies for meshes, weights and states."""

import numpy as np
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from balanced_rd import build_mesh

H = np.sqrt(3.0) / 2.0


def lattice(nx: int, ny: int, jitter: np.ndarray | None = None):
    """Equilateral triangulation of ``nx * ny`` lattice points, optionally jittered."""
    pts = np.array([[i + 0.5 * (j % 2), j * H] for j in range(ny) for i in range(nx)])
    if jitter is not None:
        pts = pts + jitter

    def idx(i, j):
        return j * nx + i

    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
            if j % 2 == 0:
                tris += [(a, b, c), (b, d, c)]
            else:
                tris += [(a, d, c), (a, b, d)]
    return pts, np.array(tris)


@st.composite
def interval_meshes(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    gaps = draw(arrays(float, n - 1, elements=st.floats(0.05, 2.0)))
    x = np.concatenate([[0.0], np.cumsum(gaps)])
    edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])
    flip = draw(arrays(bool, n - 1))
    edges[flip] = edges[flip][:, ::-1]
    return build_mesh(x[:, None], edges)


@st.composite
def planar_meshes(draw, max_side=4):
    nx = draw(st.integers(2, max_side))
    ny = draw(st.integers(2, max_side))
    # jitter of 0.08 keeps every angle within about 60 +- 20 degrees
    jitter = draw(arrays(float, (nx * ny, 2), elements=st.floats(-0.08, 0.08)))
    pts, tris = lattice(nx, ny, jitter)
    return build_mesh(pts, triangles=tris)


meshes = st.one_of(interval_meshes(), planar_meshes())


def edge_weights_for(mesh, m=1):
    return arrays(float, (mesh.n_edges, m) if m > 1 else mesh.n_edges, elements=st.floats(0.01, 10.0))
