import numpy as np
import pytest

from rpcc.config import RansacConfig
from rpcc.ground import extract_ground, plane_distances, ransac_plane
from rpcc.errors import SizeError
from rpcc.scenes import SENSOR_HEIGHT, make_scene


def lstsq_plane(points):
    """z = a x + b y + c by ordinary least squares, as a unit (a, b, c, d) with c > 0."""
    A = np.c_[points[:, :2], np.ones(len(points))]
    (a, b, c), *_ = np.linalg.lstsq(A, points[:, 2], rcond=None)
    n = np.array([-a, -b, 1.0, -c])
    return n / np.linalg.norm(n[:3])


@pytest.fixture(scope="module")
def flat(hdl64e):
    return make_scene("ground", hdl64e, seed=2, noise=0.005)


def test_flat_ground_recovered(flat):
    g = extract_ground(flat)
    assert g.found
    a, b, c, d = g.plane
    assert c > 0
    assert abs(d - SENSOR_HEIGHT) <= 0.02
    assert np.degrees(np.arccos(min(1.0, c))) <= 1.0
    oracle = lstsq_plane(flat.points()[g.ground_mask[flat.valid]])
    assert abs(d - oracle[3]) < 0.01
    assert np.degrees(np.arccos(min(1.0, abs(g.plane[:3] @ oracle[:3])))) < 0.2


def test_exactly_coplanar_takes_every_candidate(hdl64e):
    img = make_scene("ground", hdl64e, seed=0, noise=0.0)
    g = extract_ground(img)
    assert np.array_equal(g.ground_mask, img.valid)


def test_no_candidates_means_no_ground(flat):
    g = extract_ground(flat, RansacConfig(ground_z_max=-50.0))
    assert not g.found and not g.ground_mask.any()


def test_ground_properties(street_64):
    cfg = RansacConfig()
    a, b = extract_ground(street_64, cfg), extract_ground(street_64, cfg)
    assert np.array_equal(a.ground_mask, b.ground_mask)
    assert np.array_equal(a.plane, b.plane)
    assert not (a.ground_mask & ~street_64.valid).any()
    dist = plane_distances(street_64.points()[a.ground_mask[street_64.valid]], a.plane)
    assert dist.max() <= cfg.threshold
    assert np.sqrt(np.mean(dist ** 2)) <= cfg.threshold


def test_ransac_rejects_collinear():
    pts = np.c_[np.arange(10.0), np.zeros(10), np.zeros(10)]
    assert ransac_plane(pts, RansacConfig()) == (None, None)
    with pytest.raises(SizeError):
        ransac_plane(pts[:2], RansacConfig())


def test_ransac_ignores_outliers():
    rng = np.random.default_rng(4)
    plane_pts = np.c_[rng.uniform(-5, 5, (200, 2)), np.full(200, 1.0)]
    junk = rng.uniform(-5, 5, (40, 3))
    plane, inliers = ransac_plane(np.vstack([plane_pts, junk]), RansacConfig(threshold=0.01))
    assert inliers[:200].all()
    np.testing.assert_allclose(plane, [0, 0, 1, -1], atol=1e-9)
