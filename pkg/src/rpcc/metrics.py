"""Rate and reconstruction-quality metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import SizeError

RAW_BPP = 96.0  # three float32 coordinates per point
DEFAULT_TAU = 0.02
DEFAULT_PEAK = 59.70
PSNR_CAP = 200.0
NORMAL_NEIGHBORS = 10


def _cloud(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise SizeError("metric needs a non-empty point cloud")
    return pts


def nearest_neighbors(query, reference):
    """``(distances, indices)`` of each query point's nearest reference point."""
    tree = cKDTree(_cloud(reference))
    return tree.query(_cloud(query), k=1)


def chamfer_one_way(src, dst) -> float:
    d, _ = nearest_neighbors(src, dst)
    return float(d.mean())


def chamfer_sym(p, p_hat) -> float:
    """Mean of the two one-way mean nearest-neighbour distances."""
    return 0.5 * (chamfer_one_way(p, p_hat) + chamfer_one_way(p_hat, p))


def f1_score(p, p_hat, tau: float = DEFAULT_TAU) -> float:
    if not tau > 0:
        raise ValueError("tau must be positive")
    d_hat, _ = nearest_neighbors(p_hat, p)
    d_orig, _ = nearest_neighbors(p, p_hat)
    tp = int(np.count_nonzero(d_hat <= tau))
    fp = len(d_hat) - tp
    fn = int(np.count_nonzero(d_orig > tau))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def estimate_normals(points, k: int = NORMAL_NEIGHBORS) -> np.ndarray:
    """Unit normals from a plane fit over each point's ``k`` nearest neighbours."""
    pts = _cloud(points)
    k = min(k, len(pts))
    if k < 3:
        return np.tile([0.0, 0.0, 1.0], (len(pts), 1))
    _, idx = cKDTree(pts).query(pts, k=k)
    nbrs = pts[idx]
    centered = nbrs - nbrs.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, :, 0]


def point_to_plane_mse(reference, test, normals=None) -> float:
    """Mean squared distance from test points to their nearest reference point's tangent plane."""
    ref = _cloud(reference)
    if normals is None:
        normals = estimate_normals(ref)
    _, idx = nearest_neighbors(test, ref)
    err = np.einsum("ij,ij->i", _cloud(test) - ref[idx], normals[idx])
    return float(np.mean(err * err))


def d2_psnr(p, p_hat, peak: float = DEFAULT_PEAK) -> float:
    """Point-to-plane PSNR in dB, capped at ``PSNR_CAP`` for identical clouds."""
    mse = max(point_to_plane_mse(p, p_hat), point_to_plane_mse(p_hat, p))
    if mse <= 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10 * math.log10(3 * peak * peak / mse))


def rate(total_bytes: int, point_count: int) -> tuple[float, float]:
    """``(bpp, compression_ratio)`` for a stream of ``total_bytes``."""
    if point_count < 1:
        raise SizeError("rate needs at least one point")
    bpp = 8.0 * total_bytes / point_count
    return bpp, (RAW_BPP / bpp if bpp > 0 else math.inf)


@dataclass
class QualityReport:
    bpp: float | None = None
    compression_ratio: float | None = None
    info_bpp: float | None = None
    residual_bpp: float | None = None
    f1: float | None = None
    tau: float = DEFAULT_TAU
    cd_sym: float | None = None
    d2_psnr: float | None = None
    peak: float = DEFAULT_PEAK
    original_points: int | None = None
    reconstructed_points: int | None = None
    per_cluster: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def rate_report(frame, original_count: int) -> QualityReport:
    bpp, ratio = rate(frame.total_bytes, original_count)
    return QualityReport(
        bpp=bpp, compression_ratio=ratio,
        info_bpp=8.0 * frame.info_bytes / original_count,
        residual_bpp=8.0 * frame.residual_bytes / original_count,
        original_points=original_count,
    )


def quality_report(p, p_hat, *, tau: float = DEFAULT_TAU, peak: float = DEFAULT_PEAK,
                   report: QualityReport | None = None) -> QualityReport:
    report = report or QualityReport()
    report.tau, report.peak = tau, peak
    report.f1 = f1_score(p, p_hat, tau)
    report.cd_sym = chamfer_sym(p, p_hat)
    report.d2_psnr = d2_psnr(p, p_hat, peak)
    report.original_points = len(_cloud(p))
    report.reconstructed_points = len(_cloud(p_hat))
    return report


def per_cluster_errors(labels, original, reconstructed, accuracies) -> list[dict]:
    """Radial error statistics per cluster label for a decoded frame."""
    valid = labels >= 0
    lab = labels[valid]
    err = np.abs(reconstructed[valid] - original[valid])
    rows = []
    for k in np.unique(lab):
        e = err[lab == k]
        rows.append({"cluster": int(k), "points": int(len(e)), "accuracy": float(accuracies[k]),
                     "mean_abs_error": float(e.mean()), "max_abs_error": float(e.max())})
    return rows
