"""Spherical projection between Cartesian LiDAR points and range-image pixels.

Rows index elevation (row 0 is the lowest beam at ``phi_min``), columns index
azimuth starting at theta = 0 and increasing counter-clockwise.  Bin centres
are ``phi = phi_min + row / sigma`` and ``theta = col * rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, OutOfFovError


def round_half_away(x):
    """Round half away from zero; works on scalars and arrays.

    Every binning and quantization step in the codec goes through this one
    rule so encoder and decoder agree bit for bit.
    """
    if isinstance(x, np.ndarray):
        return np.copysign(np.floor(np.abs(x) + 0.5), x)
    return math.copysign(math.floor(abs(x) + 0.5), x)


@dataclass(frozen=True)
class SensorGeometry:
    num_beams: int
    horizontal_resolution: float  # degrees per column
    phi_min: float  # degrees
    phi_max: float  # degrees

    def __post_init__(self):
        if int(self.num_beams) != self.num_beams or self.num_beams < 1:
            raise ValueError(f"num_beams must be a positive integer, got {self.num_beams}")
        if not 0 < self.horizontal_resolution <= 360:
            raise ValueError(f"horizontal_resolution must be in (0, 360], got {self.horizontal_resolution}")
        if not self.phi_min < self.phi_max:
            raise ValueError("phi_min must be below phi_max")
        if self.width > 0xFFFF or self.num_beams > 0xFFFF:
            raise ValueError("range image dimensions must fit in 16 bits")

    @property
    def height(self) -> int:
        return int(self.num_beams)

    @property
    def width(self) -> int:
        return int(round_half_away(360.0 / self.horizontal_resolution))

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width

    @property
    def sigma(self) -> float:
        """Rows per degree of elevation.

        The first and last beams sit exactly on ``phi_min`` and ``phi_max``.
        """
        return max(self.height - 1, 1) / (self.phi_max - self.phi_min)

    def row_angles(self) -> np.ndarray:
        return self.phi_min + np.arange(self.height, dtype=np.float64) / self.sigma

    def col_angles(self) -> np.ndarray:
        return np.arange(self.width, dtype=np.float64) * self.horizontal_resolution


class PixelCoord(NamedTuple):
    row: int
    col: int
    r: float


def spherical_of(point) -> tuple[float, float, float]:
    """Return ``(r, theta, phi)`` with angles in degrees.

    theta lies in (-180, 180], phi in [-90, 90].
    """
    x, y, z = (float(v) for v in point)
    r = math.sqrt(x * x + y * y + z * z)
    if not r > 0:
        raise DegenerateInputError("point at the sensor origin has no direction")
    theta = math.degrees(math.atan2(y, x))
    if theta == -180.0:
        theta = 180.0
    phi = math.degrees(math.asin(max(-1.0, min(1.0, z / r))))
    return r, theta, phi


def project(point, geom: SensorGeometry) -> PixelCoord:
    r, theta, phi = spherical_of(point)
    rows, cols, ok = _bin(np.array([theta]), np.array([phi]), geom)
    if not ok[0]:
        raise OutOfFovError(
            f"elevation {phi:.4f} deg outside [{geom.phi_min}, {geom.phi_max}]"
        )
    return PixelCoord(int(rows[0]), int(cols[0]), r)


def _bin(theta, phi, geom):
    theta = np.mod(theta, 360.0)
    cols = round_half_away(theta / geom.horizontal_resolution).astype(np.int64) % geom.width
    row_f = (phi - geom.phi_min) * geom.sigma
    # half a row of slack on either edge of the field of view
    ok = (row_f >= -0.5) & (row_f <= geom.height - 0.5)
    rows = np.clip(round_half_away(row_f), 0, geom.height - 1).astype(np.int64)
    return rows, cols, ok


def project_many(xyz: np.ndarray, geom: SensorGeometry):
    """Vectorised :func:`project`.

    Returns ``(rows, cols, r, ok)``; ``ok`` is False for points at the origin,
    with non-finite coordinates, or outside the vertical field of view.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    r = np.sqrt(x * x + y * y + z * z)
    good = np.isfinite(r) & (r > 0)
    safe_r = np.where(good, r, 1.0)
    theta = np.degrees(np.arctan2(y, x))
    phi = np.degrees(np.arcsin(np.clip(np.where(good, z, 0.0) / safe_r, -1.0, 1.0)))
    rows, cols, ok = _bin(np.where(good, theta, 0.0), phi, geom)
    return rows, cols, r, ok & good


@lru_cache(maxsize=32)
def _ray_table(geom: SensorGeometry):
    phi = np.radians(geom.row_angles())
    theta = np.radians(geom.col_angles())
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    cos_theta, sin_theta = np.cos(theta), np.sin(theta)
    ux = cos_phi[:, None] * cos_theta[None, :]
    uy = cos_phi[:, None] * sin_theta[None, :]
    uz = np.broadcast_to(sin_phi[:, None], geom.shape).copy()
    for a in (ux, uy, uz):
        a.setflags(write=False)
    return ux, uy, uz


def ray_directions(geom: SensorGeometry):
    """Unit viewing rays ``(ux, uy, uz)`` at every bin centre, each H x W.

    The tables are cached and read-only; encoder and decoder share them, which
    keeps predictions bit-identical.
    """
    return _ray_table(geom)


def backproject(row: int, col: int, r_hat: float, geom: SensorGeometry) -> np.ndarray:
    if not (0 <= row < geom.height and 0 <= col < geom.width):
        raise IndexError(f"pixel ({row}, {col}) outside {geom.shape}")
    if r_hat < 0:
        raise ValueError("range must be non-negative")
    ux, uy, uz = ray_directions(geom)
    return np.array([ux[row, col] * r_hat, uy[row, col] * r_hat, uz[row, col] * r_hat])


def cloud_to_range_image(points, geom: SensorGeometry):
    """Rasterise a point cloud; nearer points win pixel collisions.

    Returns ``(RangeImage, dropped_count)`` where dropped points are the
    degenerate, out-of-FOV and collision-shadowed ones.
    """
    from .range_image import RangeImage

    xyz = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    depths = np.full(geom.shape, RangeImage.EMPTY, dtype=np.float64)
    valid = np.zeros(geom.shape, dtype=bool)
    if len(xyz) == 0:
        return RangeImage(geom, depths, valid), 0
    rows, cols, r, ok = project_many(xyz, geom)
    idx = np.flatnonzero(ok)
    flat = rows[idx] * geom.width + cols[idx]
    # sort by pixel, then range, then input order; keep the first of each pixel
    order = np.lexsort((idx, r[idx], flat))
    flat_sorted = flat[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    keep = order[first]
    depths.reshape(-1)[flat[keep]] = r[idx[keep]]
    valid.reshape(-1)[flat[keep]] = True
    dropped = len(xyz) - len(keep)
    return RangeImage(geom, depths, valid), int(dropped)
