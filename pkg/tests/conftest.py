import io

import pytest
from PIL import Image, ImageDraw

from sketch2print.gateway import mock_gateway
from sketch2print.metrics import HistogramEmbedder
from sketch2print.pipeline import PipelineService
from sketch2print.store import DataStore


def make_sketch(seed: int = 0, size: int = 256) -> bytes:
    """A synthetic hand-drawn sketch: black outlines on a white canvas."""
    img = Image.new("L", (size, size), 255)
    draw = ImageDraw.Draw(img)
    x0 = 40 + seed * 13 % 40
    y0 = 40 + seed * 7 % 30
    draw.ellipse((x0, y0, x0 + 120, y0 + 110), outline=0, width=4)
    draw.line((x0 + 60, y0 + 110, x0 + 60, y0 + 160), fill=0, width=4)
    draw.rectangle((x0 + 30, y0 + 30, x0 + 90, y0 + 80), outline=0, width=2)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture
def sketch() -> bytes:
    return make_sketch(0)


@pytest.fixture
def store(tmp_path) -> DataStore:
    return DataStore(tmp_path / "data")


@pytest.fixture
def pipeline(tmp_path) -> PipelineService:
    return PipelineService(
        DataStore(tmp_path / "data"), mock_gateway(seed=0), HistogramEmbedder()
    )
