"""RANSAC plane fitting and ground extraction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RansacConfig
from .errors import SizeError
from .range_image import RangeImage


def orient_plane(plane: np.ndarray) -> np.ndarray:
    """Normalise ``(a, b, c, d)`` to a unit normal with its first non-zero of c, b, a positive."""
    plane = np.asarray(plane, dtype=np.float64)
    plane = plane / np.linalg.norm(plane[:3])
    for k in (2, 1, 0):
        if plane[k] != 0:
            return -plane if plane[k] < 0 else plane
    return plane


def plane_distances(points: np.ndarray, plane) -> np.ndarray:
    a, b, c, d = plane
    return np.abs(points[:, 0] * a + points[:, 1] * b + points[:, 2] * c + d)


def refit_plane(points: np.ndarray) -> np.ndarray:
    """Total least-squares plane through ``points`` (at least 3, not collinear)."""
    centroid = points.mean(axis=0)
    _, s, vt = np.linalg.svd(points - centroid, full_matrices=False)
    normal = vt[-1]
    return orient_plane(np.append(normal, -normal @ centroid))


def ransac_plane(points: np.ndarray, cfg: RansacConfig, max_tilt_deg: float | None = None):
    """Best plane by inlier count, refit over its inliers.

    Samples whose three points are (nearly) collinear are skipped, as are
    hypotheses tilted more than ``max_tilt_deg`` from vertical when given.
    Ties go to the lowest iteration.  Returns ``(plane, inlier_mask)`` or
    ``(None, None)`` when every sample was rejected.
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n < 3:
        raise SizeError("plane fitting needs at least 3 points")
    rng = np.random.default_rng(cfg.seed)
    idx = np.stack([rng.choice(n, size=3, replace=False) for _ in range(cfg.iterations)])
    p0, p1, p2 = points[idx[:, 0]], points[idx[:, 1]], points[idx[:, 2]]
    normals = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(normals, axis=1)
    scale = np.maximum(np.linalg.norm(p1 - p0, axis=1) * np.linalg.norm(p2 - p0, axis=1), 1e-300)
    usable = norms > 1e-9 * scale
    normals = normals / np.where(usable, norms, 1.0)[:, None]
    if max_tilt_deg is not None:
        usable &= np.abs(normals[:, 2]) >= np.cos(np.radians(max_tilt_deg))
    if not usable.any():
        return None, None
    d = -np.einsum("ij,ij->i", normals, p0)
    dist = np.abs(points @ normals[usable].T + d[usable])
    counts = (dist <= cfg.threshold).sum(axis=0)
    best = int(np.argmax(counts))
    inliers = dist[:, best] <= cfg.threshold
    plane = orient_plane(np.append(normals[usable][best], d[usable][best]))
    if inliers.sum() >= 3:
        refit = refit_plane(points[inliers])
        if np.all(np.isfinite(refit)):
            plane = refit
    return plane, inliers


@dataclass(frozen=True, eq=False)
class GroundResult:
    plane: np.ndarray | None  # (a, b, c, d) with c >= 0, or None without ground
    ground_mask: np.ndarray

    @property
    def found(self) -> bool:
        return self.plane is not None


def ground_candidates(z: np.ndarray, cfg: RansacConfig) -> np.ndarray:
    z_max = cfg.ground_z_max if cfg.ground_z_max is not None else np.percentile(z, 25)
    return z <= z_max


def extract_ground(img: RangeImage, cfg: RansacConfig = RansacConfig()) -> GroundResult:
    cfg.validate()
    none = GroundResult(None, np.zeros(img.geom.shape, dtype=bool))
    if img.valid_count < 3:
        return none
    pts = img.points()
    cand = ground_candidates(pts[:, 2], cfg)
    if cand.sum() < 3:
        return none
    plane, _ = ransac_plane(pts[cand], cfg, max_tilt_deg=cfg.ground_max_tilt)
    if plane is None:
        return none
    return GroundResult(plane, ground_mask_for(img, pts, plane, cfg.threshold))


def ground_mask_for(img: RangeImage, pts: np.ndarray, plane, threshold: float) -> np.ndarray:
    mask = np.zeros(img.geom.shape, dtype=bool)
    mask[img.valid] = plane_distances(pts, plane) <= threshold
    return mask
