"""
Mesh repair, one operation at a time
====================================

Builds a deliberately broken model (a holey sphere plus floating debris),
then walks it through each repair stage and prints the diagnostics after
every step, ending with a binary STL on disk.
"""

import argparse
from pathlib import Path

import numpy as np

from sketch2print.mesh import (
    RepairPlan,
    TriangleMesh,
    analyze,
    apply_plan,
    box,
    concatenate,
    fill_holes,
    remove_small_components,
    smooth,
    uv_sphere,
    weld_vertices,
    write_stl,
)


def report_line(label: str, mesh: TriangleMesh) -> None:
    r = analyze(mesh)
    print(
        f"{label:<22} triangles={r.triangle_count:<5} boundary={r.boundary_edge_count:<4}"
        f" components={r.component_count} volume={r.signed_volume:9.4f}"
        f" printable={r.printable}"
    )


def broken_model() -> TriangleMesh:
    sphere = uv_sphere(radius=10.0, rings=17, segments=24)
    # Tear a hole: drop a strip of triangles near the equator.
    holey = TriangleMesh(vertices=sphere.vertices, triangles=sphere.triangles[:-9])
    debris = box(size=(0.5, 0.5, 0.5), origin=(30.0, 0.0, 0.0))
    combined = concatenate([holey, debris])
    # Duplicate every vertex per triangle to simulate soup input.
    soup_vertices = combined.vertices[combined.triangles].reshape(-1, 3)
    soup_triangles = np.arange(len(soup_vertices)).reshape(-1, 3)
    return TriangleMesh(vertices=soup_vertices, triangles=soup_triangles)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--out", default="repaired.stl", help="output STL path")
    args = parser.parse_args()

    mesh = broken_model()
    report_line("as delivered", mesh)

    mesh = weld_vertices(mesh, epsilon=1e-6)
    report_line("after weld", mesh)

    mesh = remove_small_components(mesh, min_fraction=0.1)
    report_line("after de-fragment", mesh)

    mesh = fill_holes(mesh)
    report_line("after hole fill", mesh)

    mesh = smooth(mesh, lam=0.5, mu=-0.53, iterations=5)
    report_line("after smoothing", mesh)

    # The one-call version runs the same sequence from a plan.
    replayed, final = apply_plan(broken_model(), RepairPlan(weld_epsilon=1e-6))
    print(f"\napply_plan reproduces the result: printable={final.printable}")

    Path(args.out).write_bytes(write_stl(mesh))
    print(f"wrote {args.out} ({Path(args.out).stat().st_size} bytes)")


if __name__ == "__main__":
    main()
