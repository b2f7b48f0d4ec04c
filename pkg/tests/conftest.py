import numpy as np
import pytest

from rpcc.config import sensor_geometry
from rpcc.geometry import SensorGeometry
from rpcc.range_image import RangeImage
from rpcc.scenes import make_scene

# 31 beams over +-15 deg: one row per degree, row 15 looks at the horizon
UNIT_GEOM = SensorGeometry(31, 0.2, -15.0, 15.0)
SMALL_GEOM = SensorGeometry(16, 1.0, -15.0, 15.0)


@pytest.fixture(scope="session")
def hdl64e():
    return sensor_geometry("hdl64e")


@pytest.fixture(scope="session")
def street_64(hdl64e):
    return make_scene("street", hdl64e, seed=3)


@pytest.fixture(scope="session")
def small_room():
    return make_scene("room", SensorGeometry(32, 0.5, -20.0, 10.0), seed=1)


def image_from(geom, depth_fn):
    """RangeImage whose depth at (row, col) comes from ``depth_fn(row, col)``; NaN means invalid."""
    rows, cols = np.indices(geom.shape)
    d = np.asarray(depth_fn(rows, cols), dtype=np.float64)
    valid = np.isfinite(d)
    return RangeImage(geom, np.where(valid, d, RangeImage.EMPTY), valid)


# criterion number -> (passed, title, details); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str, dict]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, details = ACCEPTANCE[n]
        extra = "  ".join(f"{k}={_fmt(v)}" for k, v in details.items())
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d} {title}  {extra}".rstrip())


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)
