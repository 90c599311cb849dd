"""Repair operations: weld, fragment removal, hole filling, smoothing.

All functions are pure and deterministic. `apply_plan` runs the fixed
order weld -> remove_small_components -> fill_holes -> smooth -> analyze.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import NonmanifoldBoundary, ValidationError
from .analyze import ManufacturabilityReport, analyze, connected_components
from .tri import TriangleMesh


@dataclass(frozen=True)
class RepairPlan:
    weld_epsilon: float = 1e-5
    component_min_fraction: float = 0.02
    fill_holes: bool = True
    smoothing_lambda: float = 0.5
    smoothing_mu: float = -0.53
    smoothing_iterations: int = 0

    def __post_init__(self):
        if self.weld_epsilon < 0:
            raise ValidationError("weld_epsilon must be >= 0")
        if not 0 <= self.component_min_fraction < 1:
            raise ValidationError("component_min_fraction must be in [0, 1)")
        if not 0 < self.smoothing_lambda <= 1:
            raise ValidationError("smoothing_lambda must be in (0, 1]")
        if not math.isfinite(self.smoothing_mu):
            raise ValidationError("smoothing_mu must be finite")
        if self.smoothing_iterations < 0:
            raise ValidationError("smoothing_iterations must be >= 0")

    def to_dict(self) -> dict:
        return {
            "weld_epsilon": self.weld_epsilon,
            "component_min_fraction": self.component_min_fraction,
            "fill_holes": self.fill_holes,
            "smoothing_lambda": self.smoothing_lambda,
            "smoothing_mu": self.smoothing_mu,
            "smoothing_iterations": self.smoothing_iterations,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RepairPlan":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown repair plan fields: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class BoundaryLoop:
    """Closed cycle of boundary vertices, ordered in hole-filling winding
    (opposite to the surrounding surface's traversal of the rim)."""

    vertices: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.vertices)


def _prune_unreferenced(mesh: TriangleMesh) -> TriangleMesh:
    if not mesh.triangle_count:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    used = np.unique(mesh.triangles)
    remap = np.full(mesh.vertex_count, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    colors = mesh.colors[used] if mesh.colors is not None else None
    return TriangleMesh(mesh.vertices[used], remap[mesh.triangles], colors)


def weld_vertices(mesh: TriangleMesh, epsilon: float) -> TriangleMesh:
    """Merge vertices within `epsilon` of each other (inclusive).

    Each vertex maps to the nearest already-kept vertex within epsilon
    (scanning in index order via a spatial-hash grid), so no two surviving
    vertices lie within epsilon; triangles that collapse to a repeated
    index are dropped. Welding twice is a no-op.
    """
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    n = mesh.vertex_count
    if n == 0:
        return mesh

    vertices = mesh.vertices
    mapping = np.empty(n, dtype=np.int64)
    kept: list[int] = []

    if epsilon == 0.0:
        seen: dict[bytes, int] = {}
        for i in range(n):
            key = vertices[i].tobytes()
            if key in seen:
                mapping[i] = seen[key]
            else:
                seen[key] = len(kept)
                mapping[i] = len(kept)
                kept.append(i)
    else:
        cells = np.floor(vertices / epsilon).astype(np.int64)
        grid: dict[tuple[int, int, int], list[int]] = {}
        eps2 = epsilon * epsilon
        for i in range(n):
            cx, cy, cz = (int(c) for c in cells[i])
            candidates = []
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    for dz in (-1, 0, 1):
                        for j in grid.get((cx + dx, cy + dy, cz + dz), ()):
                            d = vertices[kept[j]] - vertices[i]
                            d2 = float(d @ d)
                            if d2 <= eps2:
                                candidates.append((d2, j))
            if candidates:
                mapping[i] = min(candidates)[1]
            else:
                mapping[i] = len(kept)
                grid.setdefault((cx, cy, cz), []).append(len(kept))
                kept.append(i)

    new_vertices = vertices[kept]
    colors = mesh.colors[kept] if mesh.colors is not None else None
    triangles = mapping[mesh.triangles]
    if len(triangles):
        ok = (
            (triangles[:, 0] != triangles[:, 1])
            & (triangles[:, 1] != triangles[:, 2])
            & (triangles[:, 0] != triangles[:, 2])
        )
        triangles = triangles[ok]
    return TriangleMesh(new_vertices, triangles, colors)


def remove_small_components(mesh: TriangleMesh, min_fraction: float) -> TriangleMesh:
    """Drop components with fewer than min_fraction * total triangles.

    The largest component (ties broken by smallest triangle index) always
    survives; unreferenced vertices are pruned afterwards.
    """
    if not 0 <= min_fraction < 1:
        raise ValidationError("min_fraction must be in [0, 1)")
    components = connected_components(mesh)
    if len(components) <= 1:
        return mesh
    total = mesh.triangle_count
    threshold = min_fraction * total
    keep = [
        comp
        for rank, comp in enumerate(components)
        if rank == 0 or len(comp) >= threshold
    ]
    selected = np.sort(np.concatenate(keep))
    return _prune_unreferenced(
        TriangleMesh(mesh.vertices, mesh.triangles[selected], mesh.colors)
    )


def boundary_loops(mesh: TriangleMesh) -> list[BoundaryLoop]:
    """Chain boundary edges into closed loops.

    Raises NonmanifoldBoundary when a vertex has more than two incident
    boundary edges (no unambiguous chaining exists) or a chain fails to
    close.
    """
    if not mesh.triangle_count:
        return []
    directed = mesh.directed_edges()
    undirected = np.sort(directed, axis=1)
    unique_edges, inverse, counts = np.unique(
        undirected, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.ravel()
    boundary_ids = np.where(counts == 1)[0]
    if not len(boundary_ids):
        return []

    # Recover the directed (surface-winding) use of each boundary edge.
    slot_of = {}
    for slot, edge_id in enumerate(inverse):
        if counts[edge_id] == 1:
            slot_of[int(edge_id)] = slot

    incident: dict[int, list[int]] = {}
    for edge_id in boundary_ids:
        u, v = (int(x) for x in unique_edges[edge_id])
        incident.setdefault(u, []).append(int(edge_id))
        incident.setdefault(v, []).append(int(edge_id))
    for vertex, edge_list in incident.items():
        if len(edge_list) > 2:
            raise NonmanifoldBoundary(
                f"vertex {vertex} has {len(edge_list)} incident boundary edges"
            )

    remaining = set(int(e) for e in boundary_ids)
    loops: list[BoundaryLoop] = []
    while remaining:
        start_id = min(remaining)  # deterministic loop order
        remaining.discard(start_id)
        u, v = (int(x) for x in directed[slot_of[start_id]])
        # Walk opposite to the surface winding so a centroid fan over the
        # loop closes the hole with consistent orientation.
        loop = [v, u]
        current_edge = start_id
        current_vertex = u
        while True:
            candidates = [e for e in incident[current_vertex] if e != current_edge]
            if len(candidates) != 1:
                raise NonmanifoldBoundary(
                    f"boundary chain broken at vertex {current_vertex}"
                )
            next_edge = candidates[0]
            a, b = (int(x) for x in unique_edges[next_edge])
            next_vertex = b if a == current_vertex else a
            if next_edge == start_id or next_vertex == loop[0]:
                if next_edge not in remaining and next_edge != start_id:
                    raise NonmanifoldBoundary("boundary chain failed to close")
                remaining.discard(next_edge)
                break
            remaining.discard(next_edge)
            loop.append(next_vertex)
            current_edge = next_edge
            current_vertex = next_vertex
        loops.append(BoundaryLoop(tuple(loop)))
    return loops


def fill_holes(mesh: TriangleMesh) -> TriangleMesh:
    """Close every boundary loop with a fan from the loop's vertex centroid.

    Adds one new vertex per loop; fan winding matches the surrounding
    surface orientation. A closed mesh is returned unchanged.
    """
    loops = boundary_loops(mesh)
    if not loops:
        return mesh
    vertices = mesh.vertices
    colors = mesh.colors
    new_vertices = [vertices]
    new_colors = [colors] if colors is not None else None
    new_triangles = [mesh.triangles]
    next_index = mesh.vertex_count
    for loop in loops:
        ring = np.asarray(loop.vertices, dtype=np.int64)
        centroid = vertices[ring].mean(axis=0)
        new_vertices.append(centroid[None, :])
        if new_colors is not None:
            mean_color = colors[ring].mean(axis=0).round().astype(np.uint8)
            new_colors.append(mean_color[None, :])
        fan = np.column_stack(
            [ring, np.roll(ring, -1), np.full(len(ring), next_index, dtype=np.int64)]
        )
        new_triangles.append(fan)
        next_index += 1
    return TriangleMesh(
        np.vstack(new_vertices),
        np.vstack(new_triangles),
        np.vstack(new_colors) if new_colors is not None else None,
    )


def _boundary_vertex_mask(mesh: TriangleMesh) -> np.ndarray:
    mask = np.zeros(mesh.vertex_count, dtype=bool)
    if not mesh.triangle_count:
        return mask
    undirected = np.sort(mesh.directed_edges(), axis=1)
    unique_edges, counts = np.unique(undirected, axis=0, return_counts=True)
    rim = unique_edges[counts == 1]
    mask[rim.ravel()] = True
    return mask


def smooth(mesh: TriangleMesh, lam: float, mu: float, iterations: int) -> TriangleMesh:
    """Two-step Laplacian relaxation (positive lambda step, then mu step).

    A negative mu pushes vertices back out after each shrinking lambda
    step, limiting volume loss. Boundary vertices are pinned and
    connectivity is untouched; iterations=0 is the identity.
    """
    if not 0 < lam <= 1:
        raise ValidationError("lambda must be in (0, 1]")
    if iterations < 0:
        raise ValidationError("iterations must be >= 0")
    if iterations == 0 or not mesh.triangle_count:
        return mesh

    undirected = np.sort(mesh.directed_edges(), axis=1)
    edges = np.unique(undirected, axis=0)
    movable = ~_boundary_vertex_mask(mesh)
    degree = np.zeros(mesh.vertex_count, dtype=np.float64)
    np.add.at(degree, edges[:, 0], 1.0)
    np.add.at(degree, edges[:, 1], 1.0)
    movable &= degree > 0
    safe_degree = np.where(degree > 0, degree, 1.0)[:, None]

    def laplacian(positions: np.ndarray) -> np.ndarray:
        sums = np.zeros_like(positions)
        np.add.at(sums, edges[:, 0], positions[edges[:, 1]])
        np.add.at(sums, edges[:, 1], positions[edges[:, 0]])
        return sums / safe_degree - positions

    positions = mesh.vertices.copy()
    for _ in range(iterations):
        for factor in (lam, mu):
            if factor == 0.0:
                continue
            delta = laplacian(positions)
            positions[movable] += factor * delta[movable]
    return TriangleMesh(positions, mesh.triangles, mesh.colors)


def apply_plan(
    mesh: TriangleMesh, plan: RepairPlan | None = None
) -> tuple[TriangleMesh, ManufacturabilityReport]:
    """Run the full repair pipeline and return (repaired mesh, final report)."""
    plan = plan or RepairPlan()
    repaired = weld_vertices(mesh, plan.weld_epsilon)
    repaired = remove_small_components(repaired, plan.component_min_fraction)
    if plan.fill_holes:
        repaired = fill_holes(repaired)
    if plan.smoothing_iterations > 0:
        repaired = smooth(
            repaired,
            plan.smoothing_lambda,
            plan.smoothing_mu,
            plan.smoothing_iterations,
        )
    return repaired, analyze(repaired)
