"""Pure geometry kernel: PLY in, diagnostics, repair, binary STL out."""

from .analyze import (
    DEGENERATE_AREA_MM2,
    ManufacturabilityReport,
    analyze,
    connected_components,
    signed_volume,
)
from .ply import parse_ply, write_ply
from .preview import render_silhouette
from .primitives import box, cylinder, uv_sphere
from .repair import (
    BoundaryLoop,
    RepairPlan,
    apply_plan,
    boundary_loops,
    fill_holes,
    remove_small_components,
    smooth,
    weld_vertices,
)
from .stl import read_stl, write_stl
from .tri import TriangleMesh, concatenate

__all__ = [
    "DEGENERATE_AREA_MM2",
    "BoundaryLoop",
    "ManufacturabilityReport",
    "RepairPlan",
    "TriangleMesh",
    "analyze",
    "apply_plan",
    "boundary_loops",
    "box",
    "concatenate",
    "connected_components",
    "cylinder",
    "fill_holes",
    "parse_ply",
    "read_stl",
    "remove_small_components",
    "render_silhouette",
    "signed_volume",
    "smooth",
    "uv_sphere",
    "weld_vertices",
    "write_ply",
    "write_stl",
]
