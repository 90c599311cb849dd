"""Indexed triangle mesh container.

Coordinates are float64 and treated as millimeters throughout the kernel.
All operations on meshes are pure: they return new meshes and never mutate
their input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TriangleMesh:
    """Vertices (N, 3) float64, triangles (M, 3) int indices, optional colors.

    Invariants enforced on construction: every triangle index is in range
    and every coordinate is finite.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    colors: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64)).reshape(-1, 3)
        triangles = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64)).reshape(-1, 3)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)
        if self.colors is not None:
            colors = np.ascontiguousarray(np.asarray(self.colors, dtype=np.uint8)).reshape(-1, 3)
            if len(colors) != len(vertices):
                raise ValueError("colors must have one RGB triple per vertex")
            object.__setattr__(self, "colors", colors)
        if not np.all(np.isfinite(vertices)):
            raise ValueError("mesh contains non-finite coordinates")
        if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise ValueError("triangle index out of range")

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    def with_geometry(
        self, vertices: np.ndarray, triangles: np.ndarray, colors: np.ndarray | None = None
    ) -> "TriangleMesh":
        return TriangleMesh(vertices=vertices, triangles=triangles, colors=colors)

    def directed_edges(self) -> np.ndarray:
        """All 3M directed edges, one row (u, v) per triangle edge."""
        if not len(self.triangles):
            return np.empty((0, 2), dtype=np.int64)
        return self.triangles[:, [[0, 1], [1, 2], [2, 0]]].reshape(-1, 2)

    def triangle_areas(self) -> np.ndarray:
        if not len(self.triangles):
            return np.empty(0, dtype=np.float64)
        p0 = self.vertices[self.triangles[:, 0]]
        p1 = self.vertices[self.triangles[:, 1]]
        p2 = self.vertices[self.triangles[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(p1 - p0, p2 - p0), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        if not len(self.vertices):
            return None
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def concatenate(meshes: list[TriangleMesh]) -> TriangleMesh:
    """Stack meshes into one (colors are kept only if every part has them)."""
    if not meshes:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    vertices, triangles, offset = [], [], 0
    for mesh in meshes:
        vertices.append(mesh.vertices)
        triangles.append(mesh.triangles + offset)
        offset += mesh.vertex_count
    colors = None
    if all(m.colors is not None for m in meshes):
        colors = np.vstack([m.colors for m in meshes])
    return TriangleMesh(np.vstack(vertices), np.vstack(triangles), colors)
