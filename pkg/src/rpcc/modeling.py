"""Per-cluster point/plane models and intra-prediction of the range image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CodecConfig, RansacConfig
from .errors import SizeError
from .geometry import SensorGeometry, ray_directions
from .ground import ransac_plane

POINT = 0
PLANE = 1

# plane predictions beyond this are treated like rays that miss the plane
MAX_PREDICTED_RANGE = 1000.0
# largest |d| a plane can carry on the wire
MAX_PLANE_OFFSET = 327.67


@dataclass(frozen=True)
class ClusterModel:
    tag: int
    point_r: float = 0.0
    plane: tuple[float, float, float, float] | None = None

    @classmethod
    def point(cls, r: float) -> "ClusterModel":
        return cls(POINT, float(r))

    @classmethod
    def of_plane(cls, plane, point_r: float = 0.0) -> "ClusterModel":
        return cls(PLANE, float(point_r), tuple(float(v) for v in plane))

    @property
    def is_plane(self) -> bool:
        return self.tag == PLANE


def fit_point_model(points) -> ClusterModel:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        raise SizeError("point model needs at least one point")
    return ClusterModel.point(np.linalg.norm(points, axis=1).mean())


def fit_plane_model(points, cfg: RansacConfig = RansacConfig()) -> ClusterModel | None:
    """RANSAC plane refit over its inliers, or None if every sample was degenerate."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    plane, _ = ransac_plane(points, cfg)
    if plane is None:
        return None
    return ClusterModel.of_plane(plane, np.linalg.norm(points, axis=1).mean())


def max_incidence_deg(points, plane) -> float:
    """Largest angle between the plane normal and the viewing rays to ``points``."""
    r = np.linalg.norm(points, axis=1)
    cos = np.abs(points @ np.asarray(plane[:3])) / np.where(r > 0, r, 1.0)
    return float(np.degrees(np.arccos(np.clip(cos.min(), 0.0, 1.0))))


def select_model(points, cfg: CodecConfig = CodecConfig()) -> ClusterModel:
    """Plane model unless the cluster is small, seen at grazing angles, or unfittable."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    point_model = fit_point_model(points)
    if cfg.modeling == "point_only" or len(points) < cfg.min_plane_points:
        return point_model
    plane_model = fit_plane_model(points, cfg.plane_ransac)
    if plane_model is None:
        return point_model
    if abs(plane_model.plane[3]) > MAX_PLANE_OFFSET:
        return point_model
    if max_incidence_deg(points, plane_model.plane) > cfg.max_incidence_deg:
        return point_model
    return plane_model


@dataclass(frozen=True, eq=False)
class ModelTable:
    """Column-wise view of the models, indexed by cluster label (0 is ground)."""

    is_plane: np.ndarray
    point_r: np.ndarray
    planes: np.ndarray  # (n, 4)

    @classmethod
    def from_models(cls, models) -> "ModelTable":
        n = len(models)
        is_plane = np.zeros(n, dtype=bool)
        point_r = np.zeros(n)
        planes = np.zeros((n, 4))
        for i, m in enumerate(models):
            if m is None:
                continue
            point_r[i] = m.point_r
            if m.is_plane:
                is_plane[i] = True
                planes[i] = m.plane
        return cls(is_plane, point_r, planes)


def plane_ray_range(plane_rows: np.ndarray, ux, uy, uz):
    """Range at which each ray meets its plane (r = -d / (n . u)).

    Returns ``(r, ok)``; ``ok`` is False where the ray is parallel to or
    leaves the plane, or the hit is implausibly far.
    """
    a, b, c, d = plane_rows[:, 0], plane_rows[:, 1], plane_rows[:, 2], plane_rows[:, 3]
    den = a * ux + b * uy + c * uz
    with np.errstate(divide="ignore", invalid="ignore"):
        r = -d / den
    ok = np.isfinite(r) & (r > 0) & (r <= MAX_PREDICTED_RANGE)
    return r, ok


def predict_pixels(labels, ux, uy, uz, table: ModelTable):
    """Predicted range for each pixel given flat arrays of labels and rays.

    Returns ``(r_hat, fell_back)`` where ``fell_back`` marks plane pixels that
    used the point-model value instead.
    """
    r_hat = table.point_r[labels].copy()
    plane_px = table.is_plane[labels]
    fell_back = np.zeros(len(labels), dtype=bool)
    if plane_px.any():
        r, ok = plane_ray_range(table.planes[labels[plane_px]], ux[plane_px], uy[plane_px], uz[plane_px])
        r_hat[plane_px] = np.where(ok, r, r_hat[plane_px])
        fell_back[plane_px] = ~ok
    return r_hat, fell_back


def predict(geom: SensorGeometry, labels: np.ndarray, models):
    """Intra-predicted range image for labelled pixels.

    ``models`` is a list indexed by label (or a :class:`ModelTable`).  Returns
    ``(RangeImage, fallback)`` where ``fallback[k]`` is True when some pixel
    of cluster ``k`` fell back to the point value.
    """
    from .range_image import RangeImage

    table = models if isinstance(models, ModelTable) else ModelTable.from_models(models)
    valid = labels >= 0
    ux, uy, uz = ray_directions(geom)
    lab = labels[valid]
    r_hat, fell_back = predict_pixels(lab, ux[valid], uy[valid], uz[valid], table)
    depths = np.full(geom.shape, RangeImage.EMPTY)
    depths[valid] = r_hat
    fallback = np.zeros(len(table.point_r), dtype=bool)
    fallback[np.unique(lab[fell_back])] = True
    return RangeImage(geom, depths, valid), fallback
