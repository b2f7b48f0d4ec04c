"""Region segmentation: farthest point sampling centres plus nearest-centre labels.

DBSCAN is kept as the instance-style baseline for ablations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SizeError
from .range_image import RangeImage

GROUND = 0
UNLABELED = -1


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    labels: np.ndarray  # H x W int32: -1 invalid, 0 ground, 1..K regions
    centers: np.ndarray  # K x 3; centers[k - 1] belongs to label k

    @property
    def cluster_count(self) -> int:
        return len(self.centers)


def fps_centers(points, k: int, seed_index: int = 0) -> np.ndarray:
    """Indices of ``k`` points chosen by greedy farthest point sampling."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(points)
    if not 1 <= k <= n:
        raise SizeError(f"cannot sample {k} centres from {n} points")
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = seed_index
    min_d = _sq_dist(points, points[seed_index])
    for i in range(1, k):
        nxt = int(np.argmax(min_d))  # first maximum, so lowest index on ties
        chosen[i] = nxt
        np.minimum(min_d, _sq_dist(points, points[nxt]), out=min_d)
    return chosen


def _sq_dist(points, c):
    dx = points[:, 0] - c[0]
    dy = points[:, 1] - c[1]
    dz = points[:, 2] - c[2]
    return dx * dx + dy * dy + dz * dz


def nearest_center(x, y, z, centers: np.ndarray) -> np.ndarray:
    """0-based index of the nearest centre per point; ties go to the lower index.

    Written as an explicit elementwise loop over centres so results do not
    depend on array shape, which the decoder relies on.
    """
    best = np.zeros(np.shape(x), dtype=np.int32)
    if len(centers) == 0:
        return best
    best_d = np.full(np.shape(x), np.inf)
    for j, (cx, cy, cz) in enumerate(centers):
        dx = x - cx
        dy = y - cy
        dz = z - cz
        d = dx * dx + dy * dy + dz * dz
        closer = d < best_d
        best[closer] = j
        best_d[closer] = d[closer]
    return best


def sample_stride(n: int, cap: int) -> np.ndarray:
    """Uniform stride subsample of ``range(n)`` with at most ``cap`` entries."""
    step = max(1, -(-n // cap))
    return np.arange(0, n, step)


def fps_segment(img: RangeImage, k: int, ground_mask=None, sample_cap: int = 20000,
                center_dtype=np.float32) -> ClusterAssignment:
    """Segment non-ground pixels around ``k`` FPS centres.

    FPS runs on a stride subsample capped at ``sample_cap`` points, seeded
    with the point nearest the sensor.  Centres are rounded to
    ``center_dtype`` before labelling, matching what gets transmitted.
    """
    ground_mask = _ground(img, ground_mask)
    pts = img.points()
    non_ground = ~ground_mask[img.valid]
    cand = pts[non_ground]
    if len(cand) == 0:
        return assign(img, np.zeros((0, 3)), ground_mask)
    sub = cand[sample_stride(len(cand), sample_cap)]
    seed = int(np.argmin(_sq_dist(sub, (0.0, 0.0, 0.0))))
    idx = fps_centers(sub, min(k, len(sub)), seed)
    centers = sub[idx].astype(center_dtype).astype(np.float64)
    return assign(img, centers, ground_mask)


def assign(img: RangeImage, centers, ground_mask=None) -> ClusterAssignment:
    """Label every valid pixel: ground pixels 0, the rest nearest centre + 1."""
    ground_mask = _ground(img, ground_mask)
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    labels = np.full(img.geom.shape, UNLABELED, dtype=np.int32)
    labels[ground_mask] = GROUND
    rest = img.valid & ~ground_mask
    if rest.any():
        if len(centers) == 0:
            raise SizeError("non-ground points need at least one centre")
        pts = img.points()[~ground_mask[img.valid]]
        labels[rest] = nearest_center(pts[:, 0], pts[:, 1], pts[:, 2], centers) + 1
    return ClusterAssignment(labels, centers)


def _ground(img, ground_mask):
    if ground_mask is None:
        return np.zeros(img.geom.shape, dtype=bool)
    return np.asarray(ground_mask, dtype=bool) & img.valid


def dbscan_labels(points, eps: float, min_pts: int) -> np.ndarray:
    """1-based DBSCAN cluster ids; each noise point becomes its own cluster."""
    from sklearn.cluster import DBSCAN

    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) == 0:
        return np.zeros(0, dtype=np.int64)
    raw = DBSCAN(eps=eps, min_samples=min_pts).fit_predict(points)
    labels = raw.astype(np.int64) + 1
    noise = raw < 0
    n_clusters = int(raw.max()) + 1 if (~noise).any() else 0
    labels[noise] = n_clusters + 1 + np.arange(int(noise.sum()))
    return labels


def dbscan_baseline(img: RangeImage, eps: float = 2.0, min_pts: int = 5, ground_mask=None,
                    center_dtype=np.float32) -> ClusterAssignment:
    """DBSCAN regions over non-ground pixels; centres are cluster centroids."""
    ground_mask = _ground(img, ground_mask)
    labels = np.full(img.geom.shape, UNLABELED, dtype=np.int32)
    labels[ground_mask] = GROUND
    rest = img.valid & ~ground_mask
    pts = img.points()[~ground_mask[img.valid]]
    lab = dbscan_labels(pts, eps, min_pts)
    if len(lab) == 0:
        return ClusterAssignment(labels, np.zeros((0, 3)))
    k = int(lab.max())
    if k > 0xFFFF:
        raise SizeError(f"DBSCAN produced {k} clusters, more than a frame can carry")
    counts = np.bincount(lab, minlength=k + 1)[1:]
    sums = np.stack([np.bincount(lab, weights=pts[:, i], minlength=k + 1)[1:] for i in range(3)], axis=1)
    centers = (sums / counts[:, None]).astype(center_dtype).astype(np.float64)
    labels[rest] = lab
    return ClusterAssignment(labels, centers)
