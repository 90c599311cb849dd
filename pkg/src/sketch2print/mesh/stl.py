"""Binary STL writer (and reader, used for round-trip checks).

Layout is fixed little-endian: 80-byte zero-padded header, uint32 triangle
count, then 50 bytes per triangle (normal 3xfloat32, vertices 9xfloat32,
uint16 attribute = 0). ASCII STL is out of scope.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import MeshParseError, TooManyTriangles
from .tri import TriangleMesh

_HEADER_TAG = b"sketch2print binary STL"
_RECORD = np.dtype([("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")])
assert _RECORD.itemsize == 50


def write_stl(mesh: TriangleMesh) -> bytes:
    """Serialize a mesh as binary STL.

    Normals are recomputed from right-hand winding; degenerate triangles
    get a zero normal. Vertex colors are dropped (STL has none).
    """
    count = mesh.triangle_count
    if count > 0xFFFFFFFF:
        raise TooManyTriangles(f"{count} triangles exceed the uint32 STL limit")

    header = _HEADER_TAG.ljust(80, b"\x00")[:80]
    records = np.zeros(count, dtype=_RECORD)
    if count:
        p0 = mesh.vertices[mesh.triangles[:, 0]]
        p1 = mesh.vertices[mesh.triangles[:, 1]]
        p2 = mesh.vertices[mesh.triangles[:, 2]]
        normals = np.cross(p1 - p0, p2 - p0)
        lengths = np.linalg.norm(normals, axis=1)
        ok = lengths > 0.0
        normals[ok] /= lengths[ok, None]
        normals[~ok] = 0.0
        records["normal"] = normals.astype(np.float32)
        records["verts"][:, 0, :] = p0.astype(np.float32)
        records["verts"][:, 1, :] = p1.astype(np.float32)
        records["verts"][:, 2, :] = p2.astype(np.float32)
    return header + struct.pack("<I", count) + records.tobytes()


def read_stl(data: bytes) -> TriangleMesh:
    """Parse binary STL into a triangle-soup mesh (3 vertices per triangle).

    No welding is performed; feed the result through weld_vertices to
    recover shared topology.
    """
    if len(data) < 84:
        raise MeshParseError("binary STL shorter than its fixed 84-byte prefix")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        raise MeshParseError(
            f"truncated STL: header claims {count} triangles ({expected} bytes), got {len(data)}"
        )
    records = np.frombuffer(data, dtype=_RECORD, count=count, offset=84)
    vertices = records["verts"].reshape(-1, 3).astype(np.float64)
    triangles = np.arange(3 * count, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh(vertices, triangles)
