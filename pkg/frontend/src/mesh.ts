/**
 * Binary STL and PLY readers for the cosmetic wireframe preview.
 *
 * Both parsers accept exactly what the service emits: 80-byte-header
 * binary STL, and binary little-endian PLY with float32/float64 vertex
 * coordinates, optional uchar colors, and uchar-counted int32/uint32
 * face lists. Anything else throws; callers degrade to "preview
 * unavailable". Diagnostics never come from here — they come from the
 * manufacturability report.
 */

export interface ParsedMesh {
  /** Flat xyz triples, 9 floats per triangle in draw order. */
  positions: Float32Array;
  triangleCount: number;
}

export class MeshFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MeshFormatError";
  }
}

export function parseBinaryStl(data: ArrayBuffer): ParsedMesh {
  if (data.byteLength < 84) {
    throw new MeshFormatError(`STL too short: ${data.byteLength} bytes`);
  }
  const view = new DataView(data);
  const triangleCount = view.getUint32(80, true);
  const expected = 84 + triangleCount * 50;
  if (data.byteLength !== expected) {
    throw new MeshFormatError(
      `STL header claims ${triangleCount} triangles (${expected} bytes), got ${data.byteLength}`,
    );
  }
  const positions = new Float32Array(triangleCount * 9);
  for (let t = 0; t < triangleCount; t++) {
    const base = 84 + t * 50 + 12; // skip the normal
    for (let f = 0; f < 9; f++) {
      positions[t * 9 + f] = view.getFloat32(base + f * 4, true);
    }
  }
  return { positions, triangleCount };
}

interface PlyLayout {
  vertexCount: number;
  faceCount: number;
  coordBytes: 4 | 8;
  colorBytes: number;
  indexBytes: 4;
  dataOffset: number;
}

function parsePlyHeader(data: ArrayBuffer): PlyLayout {
  const headBytes = new Uint8Array(data.slice(0, Math.min(data.byteLength, 2048)));
  let headText = "";
  for (const byte of headBytes) {
    headText += String.fromCharCode(byte);
  }
  const endMarker = "end_header\n";
  const endAt = headText.indexOf(endMarker);
  if (!headText.startsWith("ply\n") || endAt < 0) {
    throw new MeshFormatError("not a PLY header");
  }
  const lines = headText.slice(0, endAt).split("\n");
  if (!lines.includes("format binary_little_endian 1.0")) {
    throw new MeshFormatError("only binary little-endian PLY is previewable");
  }
  let vertexCount = 0;
  let faceCount = 0;
  let coordBytes: 4 | 8 = 4;
  let colorBytes = 0;
  let element = "";
  for (const line of lines) {
    const parts = line.split(/\s+/);
    if (parts[0] === "element") {
      element = parts[1];
      if (element === "vertex") {
        vertexCount = Number(parts[2]);
      } else if (element === "face") {
        faceCount = Number(parts[2]);
      }
    } else if (parts[0] === "property" && element === "vertex") {
      if (parts[1] === "double" || parts[1] === "float64") {
        coordBytes = 8;
      } else if (parts[1] === "uchar" || parts[1] === "uint8") {
        colorBytes += 1;
      }
    } else if (parts[0] === "property" && element === "face") {
      if (parts[1] !== "list" || !["uchar", "uint8"].includes(parts[2])) {
        throw new MeshFormatError("unsupported face list layout");
      }
    }
  }
  return {
    vertexCount,
    faceCount,
    coordBytes,
    colorBytes,
    indexBytes: 4,
    dataOffset: endAt + endMarker.length,
  };
}

export function parseBinaryPly(data: ArrayBuffer): ParsedMesh {
  const layout = parsePlyHeader(data);
  const view = new DataView(data);
  const vertexStride = 3 * layout.coordBytes + layout.colorBytes;
  if (data.byteLength < layout.dataOffset + layout.vertexCount * vertexStride) {
    throw new MeshFormatError("PLY truncated inside vertex data");
  }
  const vertices = new Float32Array(layout.vertexCount * 3);
  let offset = layout.dataOffset;
  for (let v = 0; v < layout.vertexCount; v++) {
    for (let axis = 0; axis < 3; axis++) {
      const at = offset + v * vertexStride + axis * layout.coordBytes;
      vertices[v * 3 + axis] =
        layout.coordBytes === 8 ? view.getFloat64(at, true) : view.getFloat32(at, true);
    }
  }
  offset += layout.vertexCount * vertexStride;

  const triangles: number[] = [];
  for (let f = 0; f < layout.faceCount; f++) {
    if (offset + 1 > data.byteLength) {
      throw new MeshFormatError("PLY truncated inside face data");
    }
    const count = view.getUint8(offset);
    offset += 1;
    if (offset + count * layout.indexBytes > data.byteLength) {
      throw new MeshFormatError("PLY truncated inside face data");
    }
    const corners: number[] = [];
    for (let c = 0; c < count; c++) {
      corners.push(view.getUint32(offset, true));
      offset += layout.indexBytes;
    }
    for (let c = 1; c + 1 < corners.length; c++) {
      triangles.push(corners[0], corners[c], corners[c + 1]);
    }
  }

  const positions = new Float32Array(triangles.length * 3);
  for (let i = 0; i < triangles.length; i++) {
    const v = triangles[i];
    positions[i * 3] = vertices[v * 3];
    positions[i * 3 + 1] = vertices[v * 3 + 1];
    positions[i * 3 + 2] = vertices[v * 3 + 2];
  }
  return { positions, triangleCount: triangles.length / 3 };
}
