"""Deterministic offline providers.

Every mock is a pure function of (seed, inputs): byte-identical outputs
across runs. Generated PNGs carry their prompt hash in a text chunk so
provenance can be traced end to end.

Image content is tuned for the intensity-histogram test embedder:

- text-to-image output is mid-gray color bands keyed on the prompt, so two
  different prompts (or variation indices) land in different histogram bins
  and score low against each other and against a line-drawn sketch;
- sketch-guided output composites the actual sketch, so it scores high
  against the sketch and against its sibling variations.

That ordering is what the route-comparison checks exercise.
"""

from __future__ import annotations

import hashlib
import io
import random
import struct

import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

from ..errors import ProviderError, ProviderErrorKind, UnsupportedImage, ValidationError
from ..mesh import TriangleMesh, box, concatenate, cylinder, uv_sphere, write_ply
from .types import DescribeResult, GeneratedImage

# Any text input containing this marker trips the content filter, mirroring
# a provider-side safety rejection.
SAFETY_TRIGGER = "do-not-render"

IMAGE_SIZE = 256

_ADJECTIVES = (
    "sleek", "curved", "angular", "compact", "slender", "bulbous",
    "tapered", "ribbed", "faceted", "rounded", "elongated", "stout",
    "minimal", "ornate", "asymmetric", "modular",
)
_OBJECTS = (
    "kitchen gadget", "hand tool", "desk lamp", "water bottle",
    "chair", "vase", "handheld mixer", "storage container",
    "game controller", "wall hook", "planter", "speaker",
    "travel mug", "door handle", "headphone stand", "utensil holder",
)
_MATERIALS = (
    "brushed steel", "matte plastic", "oiled walnut", "anodized aluminum",
    "frosted glass", "glazed ceramic", "carbon fiber", "cast iron",
    "bamboo", "soft rubber", "polished brass", "concrete",
    "cork", "pale birch", "smoked acrylic", "woven fabric",
)
_STYLES = (
    "scandinavian", "industrial", "retro-futurist", "art deco",
    "bauhaus", "organic", "brutalist", "mid-century",
    "nautical", "streamline", "utilitarian", "playful",
    "geometric", "rustic", "space-age", "biomorphic",
)


def _digest(*parts: bytes | str | int) -> bytes:
    """Order-safe hash of mixed parts (length-prefixed framing)."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, int):
            part = str(part)
        if isinstance(part, str):
            part = part.encode("utf-8")
        h.update(struct.pack("<Q", len(part)))
        h.update(part)
    return h.digest()


def _check_safety(text: str) -> None:
    if SAFETY_TRIGGER in text.lower():
        raise ProviderError(
            ProviderErrorKind.SAFETY_REJECTED,
            "input rejected by content filter",
        )


def _decode(image: bytes) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(image))
        img.load()
        return img
    except Exception as exc:
        raise UnsupportedImage(f"image does not decode: {exc}") from exc


def _encode_png(img: Image.Image, chunks: dict[str, str]) -> bytes:
    info = PngInfo()
    for key in sorted(chunks):
        info.add_text(key, chunks[key])
    buf = io.BytesIO()
    img.save(buf, format="PNG", pnginfo=info)
    return buf.getvalue()


def png_text_chunks(data: bytes) -> dict[str, str]:
    """Read back the provenance chunks of a generated PNG."""
    with Image.open(io.BytesIO(data)) as img:
        return dict(getattr(img, "text", {}))


class MockDescriber:
    """Derives a plausible description from the sketch hash, note, and seed."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def describe(self, sketch: bytes, note: str) -> DescribeResult:
        _decode(sketch)
        _check_safety(note)
        d = _digest(self.seed, sketch, note)
        adj = _ADJECTIVES[d[0] % 16]
        obj = _OBJECTS[d[1] % 16]
        mat = _MATERIALS[d[2] % 16]
        style = _STYLES[d[3] % 16]
        tag = d.hex()[:8]
        note_part = f" The note says: {note}." if note else ""
        description = (
            f"The sketch shows a {adj} {obj} with a {mat} finish,"
            f" drawn in a {style} style.{note_part}"
        )
        prompt = (
            f"A studio photograph of a {adj} {obj} with a {mat} finish,"
            f" {style} style, clean background, concept {tag}"
        )
        return DescribeResult(description=description, generation_prompt=prompt)


class MockTextToImage:
    """Paints prompt-keyed mid-gray color bands; one variant per index."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def text_to_images(self, prompt: str, n: int) -> list[GeneratedImage]:
        _check_safety(prompt)
        return [self._one(prompt, i, n) for i in range(1, n + 1)]

    def _one(self, prompt: str, index: int, n: int) -> GeneratedImage:
        d = _digest(self.seed, prompt, index, n)
        # Gray levels stay inside [40, 216): never the near-black or
        # near-white bins a line sketch occupies.
        levels = [40 + d[i] % 176 for i in range(8)]
        row = np.repeat(np.array(levels, dtype=np.uint8), IMAGE_SIZE // 8)
        pixels = np.tile(row, (IMAGE_SIZE, 1))
        img = Image.fromarray(pixels, mode="L").convert("RGB")
        revised = f"{prompt} (variation {index} of {n})"
        data = _encode_png(
            img,
            {
                "prompt_sha256": hashlib.sha256(prompt.encode("utf-8")).hexdigest(),
                "revised_prompt_sha256": hashlib.sha256(
                    revised.encode("utf-8")
                ).hexdigest(),
                "variation": f"{index}/{n}",
            },
        )
        return GeneratedImage(data=data, revised_prompt=revised)


class MockSketchGuided:
    """Composites the sketch itself plus a small index-keyed patch."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def sketch_guided_images(
        self, sketch: bytes, prompt: str, n: int
    ) -> list[GeneratedImage]:
        _check_safety(prompt)
        base = _decode(sketch).convert("L").resize(
            (IMAGE_SIZE, IMAGE_SIZE), Image.NEAREST
        )
        sketch_hash = hashlib.sha256(sketch).hexdigest()
        out = []
        for index in range(1, n + 1):
            d = _digest(self.seed, sketch, prompt, index, n)
            img = base.copy()
            # A 24x24 patch is ~0.9% of the canvas: enough to tell the
            # variations apart, small enough to keep them near the sketch.
            x = d[0] % (IMAGE_SIZE - 24)
            y = d[1] % (IMAGE_SIZE - 24)
            img.paste(40 + d[2] % 176, (x, y, x + 24, y + 24))
            revised = (
                f"{prompt} (sketch-guided variation {index} of {n})"
                if prompt
                else f"sketch-guided variation {index} of {n}"
            )
            data = _encode_png(
                img.convert("RGB"),
                {
                    "sketch_sha256": sketch_hash,
                    "prompt_sha256": hashlib.sha256(
                        prompt.encode("utf-8")
                    ).hexdigest(),
                    "variation": f"{index}/{n}",
                },
            )
            out.append(GeneratedImage(data=data, revised_prompt=revised))
        return out


class MockImageToMesh:
    """Returns a parametric primitive keyed on the image hash.

    mode selects a defect to inject so repair paths get exercised:
      clean      watertight primitive
      holes      k faces dropped (vertex-disjoint, so holes stay separate)
      fragments  a small detached tetrahedron added outside the bbox
      dupes      every triangle given private vertex copies (full unweld)
    """

    MODES = ("clean", "holes", "fragments", "dupes")

    def __init__(self, mode: str = "clean", seed: int = 0, holes: int = 3):
        if mode not in self.MODES:
            raise ValidationError(f"unknown defect mode {mode!r}")
        self.mode = mode
        self.seed = seed
        self.holes = holes

    def image_to_mesh(self, image: bytes) -> bytes:
        _decode(image)
        d = _digest(self.seed, self.mode, image)
        mesh = self._primitive(d)
        if self.mode == "holes":
            mesh = self._drop_faces(mesh, d)
        elif self.mode == "fragments":
            mesh = self._add_fragment(mesh)
        elif self.mode == "dupes":
            mesh = self._unweld(mesh)
        return write_ply(mesh, binary=True)

    def _primitive(self, d: bytes) -> TriangleMesh:
        scale = 1.0 + d[4] / 255.0
        if self.mode in ("holes", "fragments"):
            # Defect injection needs face count headroom: disjoint holes,
            # and a 4-triangle fragment under the 2% pruning threshold.
            return uv_sphere(radius=scale, rings=13, segments=16)
        kind = d[3] % 3
        if kind == 0:
            return box((scale, scale * (1.0 + d[5] / 255.0), scale))
        if kind == 1:
            return uv_sphere(radius=scale, rings=9, segments=12)
        return cylinder(radius=scale, height=2.0 * scale, segments=16)

    def _drop_faces(self, mesh: TriangleMesh, d: bytes) -> TriangleMesh:
        rng = random.Random(d)
        keep = np.ones(len(mesh.triangles), dtype=bool)
        used: set[int] = set()
        dropped = 0
        # Rejection-sample vertex-disjoint faces so no rim vertex is shared
        # between two holes.
        while dropped < self.holes:
            i = rng.randrange(len(mesh.triangles))
            verts = set(int(v) for v in mesh.triangles[i])
            if keep[i] and not verts & used:
                keep[i] = False
                used |= verts
                dropped += 1
        return TriangleMesh(mesh.vertices, mesh.triangles[keep], mesh.colors)

    def _add_fragment(self, mesh: TriangleMesh) -> TriangleMesh:
        lo, hi = mesh.bounds()
        base = np.asarray(hi) + 1.0
        verts = base + np.array(
            [[0, 0, 0], [0.2, 0, 0], [0, 0.2, 0], [0, 0, 0.2]]
        )
        tris = np.array([[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]])
        fragment = TriangleMesh(verts, tris)
        return concatenate([mesh, fragment])

    def _unweld(self, mesh: TriangleMesh) -> TriangleMesh:
        flat = mesh.triangles.reshape(-1)
        verts = mesh.vertices[flat]
        tris = np.arange(len(flat), dtype=np.int64).reshape(-1, 3)
        colors = mesh.colors[flat] if mesh.colors is not None else None
        return TriangleMesh(verts, tris, colors)


def mock_mesh_backends(seed: int = 0) -> dict[str, MockImageToMesh]:
    """The standard mock backend registry, one entry per defect mode."""
    return {
        "prim-clean": MockImageToMesh("clean", seed),
        "prim-holes": MockImageToMesh("holes", seed),
        "prim-fragments": MockImageToMesh("fragments", seed),
        "prim-dupes": MockImageToMesh("dupes", seed),
    }
