"""PLY reader/writer.

Reader contract: `format ascii 1.0` and `format binary_little_endian 1.0`
only; vertex x/y/z as float32 or float64 with optional red/green/blue uchar
colors; face vertex-index lists with a uchar/uint8 count and int32/uint32
indices; comments and unknown properties are skipped; polygons with more
than 3 vertices are fan-triangulated around their first vertex.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import MeshParseError
from .tri import TriangleMesh

# PLY scalar type name -> (struct char, byte size, numpy dtype)
_SCALAR_TYPES = {
    "char": ("b", 1, "i1"),
    "int8": ("b", 1, "i1"),
    "uchar": ("B", 1, "u1"),
    "uint8": ("B", 1, "u1"),
    "short": ("h", 2, "i2"),
    "int16": ("h", 2, "i2"),
    "ushort": ("H", 2, "u2"),
    "uint16": ("H", 2, "u2"),
    "int": ("i", 4, "i4"),
    "int32": ("i", 4, "i4"),
    "uint": ("I", 4, "u4"),
    "uint32": ("I", 4, "u4"),
    "float": ("f", 4, "f4"),
    "float32": ("f", 4, "f4"),
    "double": ("d", 8, "f8"),
    "float64": ("d", 8, "f8"),
}

_COUNT_TYPES = {"uchar", "uint8"}
_INDEX_TYPES = {"int", "int32", "uint", "uint32"}
_FLOAT_TYPES = {"float", "float32", "double", "float64"}


@dataclass
class _Property:
    name: str
    is_list: bool
    scalar_type: str
    count_type: str | None = None


@dataclass
class _Element:
    name: str
    count: int
    properties: list[_Property]


def _parse_header(data: bytes) -> tuple[str, list[_Element], int]:
    end = data.find(b"end_header")
    if end < 0:
        raise MeshParseError("missing end_header")
    body_start = data.find(b"\n", end)
    if body_start < 0:
        raise MeshParseError("header not terminated")
    body_start += 1

    lines = data[:end].decode("ascii", errors="replace").splitlines()
    lines = [ln.strip() for ln in lines if ln.strip()]
    if not lines or lines[0] != "ply":
        raise MeshParseError("bad magic: expected 'ply'")

    fmt = None
    elements: list[_Element] = []
    for line in lines[1:]:
        parts = line.split()
        keyword = parts[0]
        if keyword in ("comment", "obj_info"):
            continue
        if keyword == "format":
            if len(parts) != 3:
                raise MeshParseError(f"malformed format line: {line!r}")
            if parts[1] not in ("ascii", "binary_little_endian"):
                raise MeshParseError(f"unsupported format keyword: {parts[1]}")
            if parts[2] != "1.0":
                raise MeshParseError(f"unsupported PLY version: {parts[2]}")
            fmt = parts[1]
        elif keyword == "element":
            if len(parts) != 3:
                raise MeshParseError(f"malformed element line: {line!r}")
            try:
                count = int(parts[2])
            except ValueError:
                raise MeshParseError(f"bad element count: {parts[2]!r}") from None
            if count < 0:
                raise MeshParseError(f"negative element count: {count}")
            elements.append(_Element(parts[1], count, []))
        elif keyword == "property":
            if not elements:
                raise MeshParseError("property before any element")
            if len(parts) >= 2 and parts[1] == "list":
                if len(parts) != 5:
                    raise MeshParseError(f"malformed list property: {line!r}")
                count_type, item_type, name = parts[2], parts[3], parts[4]
                if count_type not in _SCALAR_TYPES or item_type not in _SCALAR_TYPES:
                    raise MeshParseError(f"unknown list property types: {line!r}")
                elements[-1].properties.append(
                    _Property(name, True, item_type, count_type)
                )
            else:
                if len(parts) != 3:
                    raise MeshParseError(f"malformed property line: {line!r}")
                if parts[1] not in _SCALAR_TYPES:
                    raise MeshParseError(f"unknown property type: {parts[1]}")
                elements[-1].properties.append(_Property(parts[2], False, parts[1]))
        else:
            raise MeshParseError(f"unknown header keyword: {keyword}")

    if fmt is None:
        raise MeshParseError("missing format line")
    return fmt, elements, body_start


def _fan_triangulate(polygons: list[list[int]], vertex_count: int) -> np.ndarray:
    triangles = []
    for poly in polygons:
        if len(poly) < 3:
            raise MeshParseError(f"face with {len(poly)} vertices")
        for idx in poly:
            if idx < 0 or idx >= vertex_count:
                raise MeshParseError(f"face index {idx} out of range (n={vertex_count})")
        for k in range(1, len(poly) - 1):
            triangles.append((poly[0], poly[k], poly[k + 1]))
    if not triangles:
        return np.empty((0, 3), dtype=np.int64)
    return np.asarray(triangles, dtype=np.int64)


def _find_face_list(element: _Element) -> _Property:
    for prop in element.properties:
        if prop.is_list and prop.name in ("vertex_indices", "vertex_index"):
            if prop.count_type not in _COUNT_TYPES:
                raise MeshParseError(f"unsupported face count type: {prop.count_type}")
            if prop.scalar_type not in _INDEX_TYPES:
                raise MeshParseError(f"unsupported face index type: {prop.scalar_type}")
            return prop
    raise MeshParseError("face element has no vertex index list")


def _extract_vertex_fields(
    element: _Element, columns: dict[str, np.ndarray]
) -> tuple[np.ndarray, np.ndarray | None]:
    for axis in ("x", "y", "z"):
        if axis not in columns:
            raise MeshParseError(f"vertex element missing property {axis!r}")
    props = {p.name: p for p in element.properties}
    for axis in ("x", "y", "z"):
        if props[axis].scalar_type not in _FLOAT_TYPES:
            raise MeshParseError(f"vertex {axis} must be float32 or float64")
    vertices = np.column_stack(
        [columns["x"], columns["y"], columns["z"]]
    ).astype(np.float64)
    colors = None
    if all(c in columns for c in ("red", "green", "blue")) and all(
        props[c].scalar_type in ("uchar", "uint8") for c in ("red", "green", "blue")
    ):
        colors = np.column_stack(
            [columns["red"], columns["green"], columns["blue"]]
        ).astype(np.uint8)
    return vertices, colors


def _parse_ascii_body(data: bytes, elements: list[_Element], start: int) -> TriangleMesh:
    tokens = data[start:].split()
    pos = 0

    def take(n: int) -> list[bytes]:
        nonlocal pos
        if pos + n > len(tokens):
            raise MeshParseError("truncated body: ran out of tokens")
        chunk = tokens[pos : pos + n]
        pos += n
        return chunk

    def to_number(token: bytes, type_name: str):
        try:
            if type_name in _FLOAT_TYPES:
                return float(token)
            return int(token)
        except ValueError:
            raise MeshParseError(f"bad numeric token: {token!r}") from None

    vertices = None
    colors = None
    polygons: list[list[int]] = []
    for element in elements:
        if element.name == "vertex":
            columns: dict[str, list] = {p.name: [] for p in element.properties}
            for _ in range(element.count):
                for prop in element.properties:
                    if prop.is_list:
                        count = to_number(take(1)[0], prop.count_type)
                        values = [to_number(t, prop.scalar_type) for t in take(count)]
                        columns[prop.name].append(values)
                    else:
                        columns[prop.name].append(to_number(take(1)[0], prop.scalar_type))
            arrays = {
                name: np.asarray(vals)
                for name, vals in columns.items()
                if vals and not isinstance(vals[0], list)
            }
            vertices, colors = _extract_vertex_fields(element, arrays)
        elif element.name == "face":
            face_prop = _find_face_list(element)
            for _ in range(element.count):
                row: list[int] | None = None
                for prop in element.properties:
                    if prop.is_list:
                        count = to_number(take(1)[0], prop.count_type)
                        values = [to_number(t, prop.scalar_type) for t in take(count)]
                        if prop is face_prop:
                            row = values
                    else:
                        to_number(take(1)[0], prop.scalar_type)
                polygons.append(row if row is not None else [])
        else:
            # Unknown element: consume and discard its rows.
            for _ in range(element.count):
                for prop in element.properties:
                    if prop.is_list:
                        count = to_number(take(1)[0], prop.count_type)
                        take(count)
                    else:
                        take(1)

    if vertices is None:
        raise MeshParseError("no vertex element")
    triangles = _fan_triangulate(polygons, len(vertices))
    return TriangleMesh(vertices, triangles, colors)


def _parse_binary_body(data: bytes, elements: list[_Element], start: int) -> TriangleMesh:
    offset = start
    vertices = None
    colors = None
    polygons: list[list[int]] = []

    for element in elements:
        all_scalar = all(not p.is_list for p in element.properties)
        if element.name == "vertex" and all_scalar:
            dtype = np.dtype(
                [(p.name, "<" + _SCALAR_TYPES[p.scalar_type][2]) for p in element.properties]
            )
            end = offset + dtype.itemsize * element.count
            if end > len(data):
                raise MeshParseError("truncated body in vertex element")
            rows = np.frombuffer(data, dtype=dtype, count=element.count, offset=offset)
            offset = end
            arrays = {name: rows[name] for name in dtype.names}
            vertices, colors = _extract_vertex_fields(element, arrays)
        else:
            face_prop = _find_face_list(element) if element.name == "face" else None
            for _ in range(element.count):
                row: list[int] | None = None
                for prop in element.properties:
                    if prop.is_list:
                        count_char, count_size, _ = _SCALAR_TYPES[prop.count_type]
                        if offset + count_size > len(data):
                            raise MeshParseError("truncated body in list count")
                        (count,) = struct.unpack_from("<" + count_char, data, offset)
                        offset += count_size
                        item_char, item_size, _ = _SCALAR_TYPES[prop.scalar_type]
                        if offset + item_size * count > len(data):
                            raise MeshParseError("truncated body in list items")
                        values = list(
                            struct.unpack_from(f"<{count}{item_char}", data, offset)
                        )
                        offset += item_size * count
                        if prop is face_prop:
                            row = values
                    else:
                        char, size, _ = _SCALAR_TYPES[prop.scalar_type]
                        if offset + size > len(data):
                            raise MeshParseError("truncated body in scalar property")
                        offset += size
                if element.name == "face":
                    polygons.append(row if row is not None else [])

    if vertices is None:
        raise MeshParseError("no vertex element")
    triangles = _fan_triangulate(polygons, len(vertices))
    return TriangleMesh(vertices, triangles, colors)


def parse_ply(data: bytes) -> TriangleMesh:
    """Parse PLY bytes into a TriangleMesh.

    Raises MeshParseError on bad magic, unsupported format keywords,
    truncated bodies, or out-of-range face indices.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise MeshParseError("expected bytes")
    data = bytes(data)
    fmt, elements, body_start = _parse_header(data)
    if fmt == "ascii":
        return _parse_ascii_body(data, elements, body_start)
    return _parse_binary_body(data, elements, body_start)


def write_ply(mesh: TriangleMesh, binary: bool = True, double: bool = False) -> bytes:
    """Serialize a mesh as PLY (binary little-endian by default).

    Coordinates are written float32 unless `double` is set; colors, when
    present, are written as uchar red/green/blue.
    """
    coord_type = "double" if double else "float"
    header = ["ply"]
    header.append("format binary_little_endian 1.0" if binary else "format ascii 1.0")
    header.append(f"element vertex {mesh.vertex_count}")
    header += [f"property {coord_type} {axis}" for axis in ("x", "y", "z")]
    if mesh.colors is not None:
        header += [f"property uchar {c}" for c in ("red", "green", "blue")]
    header.append(f"element face {mesh.triangle_count}")
    header.append("property list uchar int vertex_indices")
    header.append("end_header")
    head = ("\n".join(header) + "\n").encode("ascii")

    coords = mesh.vertices.astype(np.float64 if double else np.float32)
    if binary:
        parts = [head]
        if mesh.colors is not None:
            vert_dtype = np.dtype(
                [("xyz", coords.dtype.newbyteorder("<"), 3), ("rgb", "u1", 3)]
            )
            rows = np.empty(mesh.vertex_count, dtype=vert_dtype)
            rows["xyz"] = coords
            rows["rgb"] = mesh.colors
        else:
            rows = coords.astype(coords.dtype.newbyteorder("<"))
        parts.append(rows.tobytes())
        face_dtype = np.dtype([("n", "u1"), ("idx", "<i4", 3)])
        faces = np.empty(mesh.triangle_count, dtype=face_dtype)
        faces["n"] = 3
        faces["idx"] = mesh.triangles.astype(np.int32)
        parts.append(faces.tobytes())
        return b"".join(parts)

    lines = []
    for i in range(mesh.vertex_count):
        coord = " ".join(repr(float(v)) for v in coords[i])
        if mesh.colors is not None:
            coord += " " + " ".join(str(int(c)) for c in mesh.colors[i])
        lines.append(coord)
    for tri in mesh.triangles:
        lines.append("3 " + " ".join(str(int(i)) for i in tri))
    return head + ("\n".join(lines) + "\n").encode("ascii")
