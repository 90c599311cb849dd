"""Deterministic 2D silhouette raster of a mesh.

Orthographic XZ projection, dark fill on white, used to compare a mesh
candidate against the concept image it was generated from. Cosmetic
quality only; diagnostics come from the manufacturability report.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw

from .tri import TriangleMesh


def render_silhouette(mesh: TriangleMesh, size: int = 256, margin: float = 0.08) -> bytes:
    """Render the mesh silhouette as PNG bytes (front view, +y toward viewer)."""
    image = Image.new("L", (size, size), 255)
    if mesh.triangle_count:
        xs = mesh.vertices[:, 0]
        zs = mesh.vertices[:, 2]
        span = max(float(xs.max() - xs.min()), float(zs.max() - zs.min()), 1e-12)
        scale = size * (1.0 - 2.0 * margin) / span
        cx = (float(xs.max()) + float(xs.min())) / 2.0
        cz = (float(zs.max()) + float(zs.min())) / 2.0
        px = (xs - cx) * scale + size / 2.0
        # Image rows grow downward; flip z so +z is up.
        py = (cz - zs) * scale + size / 2.0
        points = np.column_stack([px, py])
        draw = ImageDraw.Draw(image)
        for tri in mesh.triangles:
            polygon = [tuple(points[i]) for i in tri]
            draw.polygon(polygon, fill=20)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()
