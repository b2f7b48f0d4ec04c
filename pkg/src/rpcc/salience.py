"""Scan-line curvature, LOAM-style key points and per-cluster salience levels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SalienceConfig
from .range_image import RangeImage
from .segmentation import GROUND

# key-point count thresholds separating levels 0|1|2|3
LEVEL_BOUNDS = (3, 10, 30)
# added to the base accuracy, per level (metres)
ACCURACY_DELTA = (0.06, 0.04, 0.02, 0.0)


def curvature(scan, i: int, half_window: int = 5) -> float:
    """Curvature of ``scan[i]`` against up to ``half_window`` neighbours per side.

    Returns NaN when fewer than two neighbours exist or the point is at the
    origin.
    """
    scan = np.asarray(scan, dtype=np.float64).reshape(-1, 3)
    lo, hi = max(0, i - half_window), min(len(scan), i + half_window + 1)
    nbrs = np.concatenate([scan[lo:i], scan[i + 1:hi]])
    norm = np.linalg.norm(scan[i])
    if len(nbrs) < 2 or norm == 0:
        return float("nan")
    diff = (scan[i] - nbrs).sum(axis=0)
    return float(np.linalg.norm(diff) / (len(nbrs) * norm))


def scan_curvature(scan: np.ndarray, half_window: int = 5) -> np.ndarray:
    """:func:`curvature` for every point of one scan line at once."""
    n = len(scan)
    if n == 0:
        return np.zeros(0)
    cs = np.vstack([np.zeros((1, 3)), np.cumsum(scan, axis=0)])
    i = np.arange(n)
    lo = np.maximum(0, i - half_window)
    hi = np.minimum(n, i + half_window + 1)
    count = hi - lo - 1
    nbr_sum = cs[hi] - cs[lo] - scan
    diff = count[:, None] * scan - nbr_sum
    norm = np.linalg.norm(scan, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.linalg.norm(diff, axis=1) / (count * norm)
    c[(count < 2) | (norm == 0)] = np.nan
    return c


def _rows(img: RangeImage):
    pts = np.full(img.geom.shape + (3,), np.nan)
    pts[img.valid] = img.points()
    for w in range(img.geom.height):
        cols = np.flatnonzero(img.valid[w])
        yield w, cols, pts[w, cols]


def key_point_candidates(img: RangeImage, cfg: SalienceConfig = SalienceConfig()):
    """Uncapped ``(edge, planar)`` candidate masks by curvature threshold alone."""
    edge = np.zeros(img.geom.shape, dtype=bool)
    planar = np.zeros(img.geom.shape, dtype=bool)
    for w, cols, scan in _rows(img):
        c = scan_curvature(scan, cfg.half_window)
        with np.errstate(invalid="ignore"):
            edge[w, cols] = c >= cfg.edge_threshold
            planar[w, cols] = c <= cfg.planar_threshold
    return edge, planar


def _pick(order, eligible, suppressed, cap, window):
    picked = []
    for j in order:
        if len(picked) >= cap:
            break
        if not eligible[j] or suppressed[j]:
            continue
        picked.append(j)
        suppressed[max(0, j - window):j + window + 1] = True
    return picked


def extract_key_points(img: RangeImage, cfg: SalienceConfig = SalienceConfig()) -> np.ndarray:
    """Per-pixel key-point flags (edge or planar) after per-row caps and suppression.

    Edges are chosen first, sharpest first; planar points then fill in,
    flattest first.  A chosen point suppresses neighbours within
    ``cfg.nms_window`` positions along the scan.
    """
    flags = np.zeros(img.geom.shape, dtype=bool)
    for w, cols, scan in _rows(img):
        if len(cols) == 0:
            continue
        c = scan_curvature(scan, cfg.half_window)
        known = ~np.isnan(c)
        cv = np.where(known, c, 0.0)
        suppressed = np.zeros(len(c), dtype=bool)
        edge_order = np.argsort(-cv, kind="stable")
        edges = _pick(edge_order, known & (cv >= cfg.edge_threshold), suppressed,
                      cfg.max_edge_per_row, cfg.nms_window)
        planar_order = np.argsort(cv, kind="stable")
        planars = _pick(planar_order, known & (cv <= cfg.planar_threshold), suppressed,
                        cfg.max_planar_per_row, cfg.nms_window)
        flags[w, cols[edges + planars]] = True
    return flags


def salience_level(count):
    return np.searchsorted(LEVEL_BOUNDS, count, side="right")


@dataclass(frozen=True, eq=False)
class SalienceMap:
    levels: np.ndarray  # per label, 0..3; index 0 is ground
    key_point_counts: np.ndarray
    base_accuracy: float

    @property
    def accuracies(self) -> np.ndarray:
        return accuracy_for_levels(self.levels, self.base_accuracy)

    @classmethod
    def uniform(cls, n_labels: int, base_accuracy: float) -> "SalienceMap":
        return cls(np.full(n_labels, 3, dtype=np.int64), np.zeros(n_labels, dtype=np.int64), base_accuracy)


def accuracy_for_levels(levels, base_accuracy: float) -> np.ndarray:
    return base_accuracy + np.asarray(ACCURACY_DELTA)[np.asarray(levels)]


def classify_clusters(labels: np.ndarray, key_flags: np.ndarray, base_accuracy: float,
                      n_labels: int | None = None) -> SalienceMap:
    """Count key points per cluster and bin the counts into salience levels.

    The ground cluster is always level 3.
    """
    if not base_accuracy > 0:
        raise ValueError("base_accuracy must be > 0")
    if n_labels is None:
        n_labels = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 1
    hits = labels[key_flags & (labels >= 0)]
    counts = np.bincount(hits, minlength=n_labels)[:n_labels]
    levels = salience_level(counts)
    levels[GROUND] = 3
    return SalienceMap(levels.astype(np.int64), counts.astype(np.int64), base_accuracy)
