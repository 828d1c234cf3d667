"""Well-centered simplicial complexes, circumcentric duals and DEC operators.

Compartments live on primal vertices; each owns its circumcentric dual cell.
Diffusion flows along primal edges, weighted by the ratio of dual to primal
edge measure.  Supported dimensions are 1 (polylines) and 2 (triangle
meshes).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import MeshError

__all__ = [
    "SimplicialMesh",
    "DecOperators",
    "build_mesh",
    "uniform_interval_mesh",
    "parse_mesh_spec",
    "load_mesh",
    "mesh_from_dict",
    "mesh_to_dict",
    "build_dec_operators",
    "weighted_laplacian",
]

_ACUTE_TOL = 1e-12


def _ro(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SimplicialMesh:
    """Geometry of a validated complex.

    ``vertex_dual`` holds the dual cell measure of every vertex (the
    compartment volume), ``edge_dual`` the measure of the dual of every edge
    (1 for a 1-D complex, where the dual of an edge is a point).
    """

    dim: int
    vertices: np.ndarray
    edges: np.ndarray
    triangles: np.ndarray | None
    edge_lengths: np.ndarray
    triangle_areas: np.ndarray | None
    vertex_dual: np.ndarray
    edge_dual: np.ndarray
    boundary_vertices: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def measure(self) -> float:
        """Total length (1-D) or area (2-D) of the domain."""
        if self.dim == 1:
            return float(self.edge_lengths.sum())
        return float(self.triangle_areas.sum())


@dataclass(frozen=True)
class DecOperators:
    """Coboundary, diagonal Hodge stars and vertex trace of a mesh."""

    d0: sp.csr_matrix
    star0: sp.dia_matrix
    star1: sp.dia_matrix
    tr0: sp.csr_matrix

    @property
    def star0_diag(self) -> np.ndarray:
        return self.star0.diagonal()

    @property
    def star1_diag(self) -> np.ndarray:
        return self.star1.diagonal()


def _circumcenter(p):
    a, b, c = p
    ab, ac = b - a, c - a
    d = 2.0 * (ab[0] * ac[1] - ab[1] * ac[0])
    ab2, ac2 = ab @ ab, ac @ ac
    ux = (ac[1] * ab2 - ab[1] * ac2) / d
    uy = (ab[0] * ac2 - ac[0] * ab2) / d
    return a + np.array([ux, uy])


def build_mesh(vertices, edges=None, triangles=None) -> SimplicialMesh:
    """Validate a complex and compute its circumcentric dual measures.

    Raises:
        MeshError: bad indices, degenerate simplices, a triangle that does not
            strictly contain its circumcenter, or a disconnected 1-skeleton.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    N, dim = V.shape
    if dim not in (1, 2):
        raise MeshError(f"only 1-D and 2-D complexes are supported (got dim={dim})")
    if N < 2:
        raise MeshError("a mesh needs at least two vertices")
    T = None
    if triangles is not None and len(triangles):
        if dim != 2:
            raise MeshError("triangles are only meaningful for 2-D meshes")
        T = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if T.min() < 0 or T.max() >= N:
            raise MeshError("triangle references a vertex out of range")
    elif dim == 2:
        raise MeshError("a 2-D mesh needs triangles")
    if edges is None:
        if T is None:
            raise MeshError("edges are required for 1-D meshes")
        edges = sorted({tuple(sorted((int(t[i]), int(t[(i + 1) % 3])))) for t in T for i in range(3)})
    E = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if E.size == 0:
        raise MeshError("mesh has no edges")
    if E.min() < 0 or E.max() >= N:
        raise MeshError("edge references a vertex out of range")
    if np.any(E[:, 0] == E[:, 1]):
        raise MeshError("edge with identical endpoints")
    keys = {}
    for k, (i, j) in enumerate(E):
        key = (min(i, j), max(i, j))
        if key in keys:
            raise MeshError(f"edges {keys[key]} and {k} coincide")
        keys[key] = k

    lengths = np.linalg.norm(V[E[:, 1]] - V[E[:, 0]], axis=1)
    if np.any(lengths <= 0):
        raise MeshError(f"zero-length edge {int(np.argmin(lengths))}")

    adj = sp.coo_matrix((np.ones(len(E)), (E[:, 0], E[:, 1])), shape=(N, N))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp != 1:
        raise MeshError(f"1-skeleton is disconnected ({n_comp} components)")

    vertex_dual = np.zeros(N)
    if dim == 1:
        np.add.at(vertex_dual, E[:, 0], 0.5 * lengths)
        np.add.at(vertex_dual, E[:, 1], 0.5 * lengths)
        edge_dual = np.ones(len(E))
        degree = np.bincount(E.ravel(), minlength=N)
        boundary = np.flatnonzero(degree == 1)
        areas = None
    else:
        edge_dual = np.zeros(len(E))
        edge_tris = np.zeros(len(E), dtype=np.int64)
        areas = np.zeros(len(T))
        for t, tri in enumerate(T):
            p = V[tri]
            ab, ac = p[1] - p[0], p[2] - p[0]
            areas[t] = 0.5 * abs(ab[0] * ac[1] - ab[1] * ac[0])
            if areas[t] <= 0:
                raise MeshError(f"triangle {t} is degenerate")
            scale = max(np.sum((p[i] - p[j]) ** 2) for i in range(3) for j in range(3))
            for i in range(3):
                u = p[(i + 1) % 3] - p[i]
                w = p[(i + 2) % 3] - p[i]
                if u @ w <= _ACUTE_TOL * scale:
                    raise MeshError(
                        f"triangle {t} {tri.tolist()} is not well-centered "
                        f"(angle at vertex {int(tri[i])} is not acute)"
                    )
            cc = _circumcenter(p)
            for i in range(3):
                a, b = int(tri[i]), int(tri[(i + 1) % 3])
                k = keys.get((min(a, b), max(a, b)))
                if k is None:
                    raise MeshError(f"triangle {t} uses edge ({a}, {b}) missing from the edge list")
                half = 0.5 * lengths[k]
                h = np.linalg.norm(0.5 * (V[a] + V[b]) - cc)
                edge_dual[k] += h
                edge_tris[k] += 1
                vertex_dual[a] += 0.5 * half * h
                vertex_dual[b] += 0.5 * half * h
        if np.any(edge_tris == 0):
            raise MeshError(f"edge {int(np.argmin(edge_tris))} belongs to no triangle")
        if np.any(edge_tris > 2):
            raise MeshError(f"edge {int(np.argmax(edge_tris))} is shared by more than two triangles")
        boundary = np.unique(E[edge_tris == 1].ravel())
        total = areas.sum()
        if abs(vertex_dual.sum() - total) > 1e-10 * total:
            raise MeshError("dual cells do not tile the domain")

    if np.any(vertex_dual <= 0):
        raise MeshError(f"vertex {int(np.argmin(vertex_dual))} has an empty dual cell")
    if np.any(edge_dual <= 0):
        raise MeshError(f"edge {int(np.argmin(edge_dual))} has an empty dual")

    return SimplicialMesh(
        dim=dim,
        vertices=_ro(V),
        edges=_ro(E, np.int64),
        triangles=None if T is None else _ro(T, np.int64),
        edge_lengths=_ro(lengths),
        triangle_areas=None if areas is None else _ro(areas),
        vertex_dual=_ro(vertex_dual),
        edge_dual=_ro(edge_dual),
        boundary_vertices=_ro(boundary, np.int64),
    )


def uniform_interval_mesh(domain_length: float, N: int) -> SimplicialMesh:
    """``N`` equally spaced vertices on ``[0, domain_length]``."""
    if int(N) != N or N < 2:
        raise MeshError(f"an interval mesh needs an integer N >= 2 (got {N})")
    if not domain_length > 0:
        raise MeshError(f"domain length must be positive (got {domain_length})")
    N = int(N)
    x = np.linspace(0.0, float(domain_length), N)
    edges = np.column_stack([np.arange(N - 1), np.arange(1, N)])
    return build_mesh(x[:, None], edges)


def parse_mesh_spec(spec: str) -> SimplicialMesh:
    """Parse ``interval:LENGTH:N`` into a uniform interval mesh."""
    parts = spec.split(":")
    if len(parts) != 3 or parts[0] != "interval":
        raise MeshError(f"mesh spec must look like interval:LENGTH:N (got {spec!r})")
    try:
        length, n = float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise MeshError(f"bad interval spec {spec!r}: {exc}") from None
    return uniform_interval_mesh(length, n)


def mesh_from_dict(data: dict) -> SimplicialMesh:
    try:
        dim = int(data["dim"])
        vertices = np.asarray(data["vertices"], dtype=float).reshape(-1, dim)
    except (KeyError, TypeError, ValueError) as exc:
        raise MeshError(f"cannot parse mesh: {exc}") from None
    return build_mesh(vertices, data.get("edges"), data.get("triangles"))


def mesh_to_dict(mesh: SimplicialMesh) -> dict:
    out = {"dim": mesh.dim, "vertices": mesh.vertices.tolist(), "edges": mesh.edges.tolist()}
    if mesh.triangles is not None:
        out["triangles"] = mesh.triangles.tolist()
    return out


def load_mesh(path) -> SimplicialMesh:
    try:
        with open(Path(path)) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MeshError(f"cannot parse mesh file {path}: {exc}") from None
    return mesh_from_dict(data)


def build_dec_operators(mesh: SimplicialMesh) -> DecOperators:
    N, Ne = mesh.n_vertices, mesh.n_edges
    rows = np.repeat(np.arange(Ne), 2)
    cols = mesh.edges.ravel()
    vals = np.tile([-1.0, 1.0], Ne)
    d0 = sp.csr_matrix((vals, (rows, cols)), shape=(Ne, N))
    # |sigma^0| == 1, so star0 is just the dual cell measure
    star0 = sp.diags(mesh.vertex_dual.copy())
    star1 = sp.diags(mesh.edge_dual / mesh.edge_lengths)
    nb = len(mesh.boundary_vertices)
    tr0 = sp.csr_matrix((np.ones(nb), (np.arange(nb), mesh.boundary_vertices)), shape=(nb, N))
    return DecOperators(d0=d0, star0=star0, star1=star1, tr0=tr0)


def weighted_laplacian(ops: DecOperators, edge_weights) -> sp.csr_matrix:
    """``d0^T diag(star1 * w) d0`` for strictly positive edge weights ``w``."""
    w = np.asarray(edge_weights, dtype=float)
    if w.shape != (ops.d0.shape[0],):
        raise ValueError(f"expected {ops.d0.shape[0]} edge weights, got shape {w.shape}")
    if not np.all(w > 0):
        raise ValueError("edge weights must be strictly positive")
    return (ops.d0.T @ sp.diags(ops.star1_diag * w) @ ops.d0).tocsr()
