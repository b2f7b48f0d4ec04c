"""The H x W depth grid and residual arithmetic on it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .geometry import SensorGeometry, ray_directions


@dataclass(frozen=True, eq=False)
class RangeImage:
    geom: SensorGeometry
    depths: np.ndarray
    valid: np.ndarray

    EMPTY = -1.0  # depth written to invalid pixels; ``valid`` is authoritative

    def __post_init__(self):
        depths = np.array(self.depths, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if depths.shape != self.geom.shape or valid.shape != self.geom.shape:
            raise ShapeError(f"expected arrays of shape {self.geom.shape}")
        d = depths[valid]
        if not (np.all(np.isfinite(d)) and np.all(d >= 0)):
            raise ValueError("valid depths must be finite and non-negative")
        depths[~valid] = self.EMPTY
        depths.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "depths", depths)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def empty(cls, geom: SensorGeometry) -> "RangeImage":
        return cls(geom, np.full(geom.shape, cls.EMPTY), np.zeros(geom.shape, dtype=bool))

    @property
    def valid_count(self) -> int:
        return int(np.count_nonzero(self.valid))

    def points(self) -> np.ndarray:
        """Valid pixels back-projected to an (N, 3) array in row-major order."""
        ux, uy, uz = ray_directions(self.geom)
        r = self.depths[self.valid]
        return np.stack([ux[self.valid] * r, uy[self.valid] * r, uz[self.valid] * r], axis=1)

    def same_as(self, other: "RangeImage") -> bool:
        return (
            self.geom == other.geom
            and np.array_equal(self.valid, other.valid)
            and np.array_equal(self.depths, other.depths)
        )


@dataclass(frozen=True, eq=False)
class ResidualPlane:
    """Per-pixel residuals; entries outside ``valid`` are zero and meaningless."""

    values: np.ndarray
    valid: np.ndarray


def _check_compatible(geom_a, valid_a, geom_b, valid_b):
    if geom_a != geom_b:
        raise ShapeError("sensor geometries differ")
    if valid_a.shape != valid_b.shape or not np.array_equal(valid_a, valid_b):
        raise ShapeError("validity masks differ")


def subtract(actual: RangeImage, predicted: RangeImage) -> ResidualPlane:
    _check_compatible(actual.geom, actual.valid, predicted.geom, predicted.valid)
    values = np.where(actual.valid, actual.depths - predicted.depths, 0.0)
    return ResidualPlane(values, actual.valid.copy())


def add_residual(predicted: RangeImage, residual: ResidualPlane) -> tuple[RangeImage, int]:
    """Inverse of :func:`subtract`.

    Negative sums are clamped to zero; returns ``(image, clamp_count)``.
    """
    _check_compatible(predicted.geom, predicted.valid, predicted.geom, residual.valid)
    total = predicted.depths + residual.values
    negative = predicted.valid & (total < 0)
    total = np.where(negative, 0.0, total)
    return RangeImage(predicted.geom, total, predicted.valid), int(np.count_nonzero(negative))


def to_point_cloud(img: RangeImage) -> np.ndarray:
    return img.points()
