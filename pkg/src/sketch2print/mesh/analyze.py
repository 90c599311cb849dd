"""Manufacturability diagnostics.

Edge classification works on a map from undirected edge to its directed
uses: 1 use = boundary, 2 = manifold, 3+ = nonmanifold. A 2-use edge whose
two uses run in the same direction marks an orientation inconsistency.
Components join triangles that share a vertex.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .tri import TriangleMesh

DEGENERATE_AREA_MM2 = 1e-12


@dataclass(frozen=True)
class ManufacturabilityReport:
    vertex_count: int
    triangle_count: int
    boundary_edge_count: int
    nonmanifold_edge_count: int
    inconsistent_orientation_edge_count: int
    component_count: int
    degenerate_triangle_count: int
    signed_volume: float
    bbox: tuple[tuple[float, float, float], tuple[float, float, float]] | None
    printable: bool

    def to_dict(self) -> dict:
        data = asdict(self)
        if data["bbox"] is not None:
            data["bbox"] = {"min": list(data["bbox"][0]), "max": list(data["bbox"][1])}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ManufacturabilityReport":
        bbox = data.get("bbox")
        if isinstance(bbox, dict):
            bbox = (tuple(bbox["min"]), tuple(bbox["max"]))
        elif bbox is not None:
            bbox = (tuple(bbox[0]), tuple(bbox[1]))
        kwargs = {k: v for k, v in data.items() if k != "bbox"}
        return cls(bbox=bbox, **kwargs)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, i: int) -> int:
        parent = self.parent
        while parent[i] != i:
            parent[i] = parent[parent[i]]  # path halving
            i = parent[i]
        return i

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def _edge_uses(mesh: TriangleMesh):
    """Unique undirected edges with per-edge use counts and use slots."""
    directed = mesh.directed_edges()
    undirected = np.sort(directed, axis=1)
    unique_edges, inverse, counts = np.unique(
        undirected, axis=0, return_inverse=True, return_counts=True
    )
    return directed, unique_edges, inverse.ravel(), counts


def signed_volume(mesh: TriangleMesh) -> float:
    """(1/6) * sum of det[v0 v1 v2] over triangles; positive for outward winding."""
    if not mesh.triangle_count:
        return 0.0
    p0 = mesh.vertices[mesh.triangles[:, 0]]
    p1 = mesh.vertices[mesh.triangles[:, 1]]
    p2 = mesh.vertices[mesh.triangles[:, 2]]
    return float(np.einsum("ij,ij->i", np.cross(p0, p1), p2).sum() / 6.0)


def connected_components(mesh: TriangleMesh) -> list[np.ndarray]:
    """Partition triangle indices by shared-vertex connectivity.

    Sorted by size descending; equal sizes break the tie by smallest
    contained triangle index.
    """
    if not mesh.triangle_count:
        return []
    uf = _UnionFind(mesh.vertex_count)
    for a, b, c in mesh.triangles:
        uf.union(int(a), int(b))
        uf.union(int(a), int(c))
    groups: dict[int, list[int]] = {}
    for ti, tri in enumerate(mesh.triangles):
        root = uf.find(int(tri[0]))
        groups.setdefault(root, []).append(ti)
    components = [np.asarray(g, dtype=np.int64) for g in groups.values()]
    components.sort(key=lambda g: (-len(g), int(g[0])))
    return components


def analyze(mesh: TriangleMesh) -> ManufacturabilityReport:
    """Compute the full manufacturability report for a mesh."""
    vertex_count = mesh.vertex_count
    triangle_count = mesh.triangle_count

    boundary = nonmanifold = inconsistent = 0
    if triangle_count:
        directed, _, inverse, counts = _edge_uses(mesh)
        boundary = int((counts == 1).sum())
        nonmanifold = int((counts >= 3).sum())
        # For 2-use edges, compare the two directed uses: consistent
        # orientation means they run in opposite directions.
        order = np.argsort(inverse, kind="stable")
        starts = np.cumsum(counts) - counts
        two = np.where(counts == 2)[0]
        if len(two):
            first = directed[order[starts[two]]]
            second = directed[order[starts[two] + 1]]
            inconsistent = int(np.all(first == second, axis=1).sum())

    degenerate = int((mesh.triangle_areas() < DEGENERATE_AREA_MM2).sum())
    components = connected_components(mesh)
    volume = signed_volume(mesh)
    bounds = mesh.bounds()
    bbox = None
    if bounds is not None:
        bbox = (tuple(map(float, bounds[0])), tuple(map(float, bounds[1])))

    printable = (
        boundary == 0
        and nonmanifold == 0
        and inconsistent == 0
        and len(components) == 1
        and degenerate == 0
        and volume > 0.0
    )
    return ManufacturabilityReport(
        vertex_count=vertex_count,
        triangle_count=triangle_count,
        boundary_edge_count=boundary,
        nonmanifold_edge_count=nonmanifold,
        inconsistent_orientation_edge_count=inconsistent,
        component_count=len(components),
        degenerate_triangle_count=degenerate,
        signed_volume=volume,
        bbox=bbox,
        printable=printable,
    )
