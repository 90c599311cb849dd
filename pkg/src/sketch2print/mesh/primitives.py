"""Parametric watertight primitives.

Mock mesh backends and the test suite build on these; all winding is
outward (positive signed volume).
"""

from __future__ import annotations

import numpy as np

from .tri import TriangleMesh

_BOX_TRIANGLES = np.asarray(
    [
        (0, 3, 2), (0, 2, 1),  # bottom  (-z)
        (4, 5, 6), (4, 6, 7),  # top     (+z)
        (0, 1, 5), (0, 5, 4),  # front   (-y)
        (3, 7, 6), (3, 6, 2),  # back    (+y)
        (0, 4, 7), (0, 7, 3),  # left    (-x)
        (1, 2, 6), (1, 6, 5),  # right   (+x)
    ],
    dtype=np.int64,
)


def box(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box with 12 triangles spanning origin..origin+size."""
    sx, sy, sz = size
    ox, oy, oz = origin
    corners = np.asarray(
        [
            (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
            (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
        ],
        dtype=np.float64,
    )
    vertices = corners * (sx, sy, sz) + (ox, oy, oz)
    return TriangleMesh(vertices, _BOX_TRIANGLES.copy())


def uv_sphere(radius=1.0, rings=21, segments=24, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Latitude/longitude sphere: 2*segments*(rings-1) triangles."""
    if rings < 3 or segments < 3:
        raise ValueError("rings and segments must be >= 3")
    cx, cy, cz = center
    vertices = [(cx, cy, cz + radius)]
    for i in range(1, rings):
        theta = np.pi * i / rings
        z = radius * np.cos(theta)
        r = radius * np.sin(theta)
        for j in range(segments):
            phi = 2.0 * np.pi * j / segments
            vertices.append((cx + r * np.cos(phi), cy + r * np.sin(phi), cz + z))
    vertices.append((cx, cy, cz - radius))
    south = len(vertices) - 1

    def ring_vertex(i: int, j: int) -> int:
        return 1 + (i - 1) * segments + (j % segments)

    triangles = []
    for j in range(segments):
        triangles.append((0, ring_vertex(1, j), ring_vertex(1, j + 1)))
    for i in range(1, rings - 1):
        for j in range(segments):
            a = ring_vertex(i, j)
            b = ring_vertex(i, j + 1)
            c = ring_vertex(i + 1, j + 1)
            d = ring_vertex(i + 1, j)
            triangles.append((a, d, c))
            triangles.append((a, c, b))
    for j in range(segments):
        triangles.append((south, ring_vertex(rings - 1, j + 1), ring_vertex(rings - 1, j)))
    return TriangleMesh(np.asarray(vertices), np.asarray(triangles, dtype=np.int64))


def cylinder(radius=0.5, height=2.0, segments=24, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed cylinder along +z with fan caps: 4*segments triangles."""
    if segments < 3:
        raise ValueError("segments must be >= 3")
    cx, cy, cz = center
    bottom_z, top_z = cz, cz + height
    vertices = []
    for z in (bottom_z, top_z):
        for j in range(segments):
            phi = 2.0 * np.pi * j / segments
            vertices.append((cx + radius * np.cos(phi), cy + radius * np.sin(phi), z))
    bottom_center = len(vertices)
    vertices.append((cx, cy, bottom_z))
    top_center = len(vertices)
    vertices.append((cx, cy, top_z))

    triangles = []
    for j in range(segments):
        k = (j + 1) % segments
        b0, b1 = j, k
        t0, t1 = segments + j, segments + k
        triangles.append((b0, b1, t1))
        triangles.append((b0, t1, t0))
        triangles.append((bottom_center, b1, b0))
        triangles.append((top_center, t0, t1))
    return TriangleMesh(np.asarray(vertices), np.asarray(triangles, dtype=np.int64))
