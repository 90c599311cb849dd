/**
 * Cosmetic SVG wireframe of a parsed mesh.
 *
 * Orthographic isometric projection, normalized to the viewport. Purely
 * decorative: quality judgments belong to the manufacturability report.
 */

import { svgEl } from "./dom.js";
import type { ParsedMesh } from "./mesh.js";

const COS30 = Math.cos(Math.PI / 6);
const SIN30 = Math.sin(Math.PI / 6);

function project(x: number, y: number, z: number): [number, number] {
  return [(x - y) * COS30, (x + y) * SIN30 - z];
}

export function renderWireframe(mesh: ParsedMesh, size = 160): SVGSVGElement {
  const svg = svgEl("svg", {
    class: "mesh-preview",
    width: String(size),
    height: String(size),
    viewBox: `0 0 ${size} ${size}`,
  });
  if (mesh.triangleCount === 0) {
    return svg;
  }

  const points: [number, number][] = [];
  for (let i = 0; i < mesh.positions.length; i += 3) {
    points.push(project(mesh.positions[i], mesh.positions[i + 1], mesh.positions[i + 2]));
  }
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const [x, y] of points) {
    minX = Math.min(minX, x);
    minY = Math.min(minY, y);
    maxX = Math.max(maxX, x);
    maxY = Math.max(maxY, y);
  }
  const span = Math.max(maxX - minX, maxY - minY) || 1;
  const pad = size * 0.08;
  const scale = (size - 2 * pad) / span;
  const sx = (x: number) => pad + (x - minX) * scale;
  const sy = (y: number) => pad + (y - minY) * scale;

  const segments: string[] = [];
  for (let t = 0; t < mesh.triangleCount; t++) {
    const [a, b, c] = [points[t * 3], points[t * 3 + 1], points[t * 3 + 2]];
    segments.push(
      `M${sx(a[0]).toFixed(1)} ${sy(a[1]).toFixed(1)}` +
        `L${sx(b[0]).toFixed(1)} ${sy(b[1]).toFixed(1)}` +
        `L${sx(c[0]).toFixed(1)} ${sy(c[1]).toFixed(1)}Z`,
    );
  }
  const path = svgEl("path", {
    d: segments.join(""),
    fill: "none",
    stroke: "currentColor",
    "stroke-width": "0.5",
  });
  svg.append(path);
  return svg;
}
