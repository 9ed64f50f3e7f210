import pytest

from config import settings
from grid import SpatialGrid


@pytest.fixture
def small_grid() -> SpatialGrid:
    return SpatialGrid(-32.0, 32.0, 256)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "OUTPUT_DIR", tmp_path)
    return tmp_path
