"""Synthetic LiDAR scenes ray-cast at range-image bin centres.

Scenes are built from boxes, vertical cylinders, spheres and a ground plane,
so every generated point lies exactly on a pixel ray and no point is lost
to projection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import SensorGeometry, ray_directions
from .range_image import RangeImage

SENSOR_HEIGHT = 1.73


@dataclass(frozen=True)
class Ground:
    z: float

    def hit(self, ux, uy, uz):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = self.z / uz
        return np.where((uz < 0) & (t > 0), t, np.inf)


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def hit(self, ux, uy, uz):
        t_near = np.full(ux.shape, -np.inf)
        t_far = np.full(ux.shape, np.inf)
        miss = np.zeros(ux.shape, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            for u, lo, hi in ((ux, self.lo[0], self.hi[0]), (uy, self.lo[1], self.hi[1]),
                              (uz, self.lo[2], self.hi[2])):
                # a ray parallel to the slab either stays inside it or never enters
                parallel = u == 0
                if not lo <= 0 <= hi:
                    miss |= parallel
                t1, t2 = lo / u, hi / u
                t_near = np.where(parallel, t_near, np.maximum(t_near, np.minimum(t1, t2)))
                t_far = np.where(parallel, t_far, np.minimum(t_far, np.maximum(t1, t2)))
        t = np.where(t_near > 0, t_near, t_far)
        return np.where(~miss & (t_near <= t_far) & (t > 0), t, np.inf)


@dataclass(frozen=True)
class Cylinder:
    cx: float
    cy: float
    radius: float
    z0: float
    z1: float

    def hit(self, ux, uy, uz):
        a = ux * ux + uy * uy
        b = -2 * (ux * self.cx + uy * self.cy)
        c = self.cx ** 2 + self.cy ** 2 - self.radius ** 2
        disc = b * b - 4 * a * c
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (-b - np.sqrt(disc)) / (2 * a)
        z = t * uz
        ok = (disc >= 0) & (a > 0) & (t > 0) & (z >= self.z0) & (z <= self.z1)
        return np.where(ok, t, np.inf)


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float

    def hit(self, ux, uy, uz):
        cx, cy, cz = self.center
        b = ux * cx + uy * cy + uz * cz
        c = cx * cx + cy * cy + cz * cz - self.radius ** 2
        disc = b * b - c
        t = b - np.sqrt(np.maximum(disc, 0))
        return np.where((disc >= 0) & (t > 0), t, np.inf)


def render(primitives, geom: SensorGeometry, *, noise: float = 0.0, dropout: float = 0.0,
           max_range: float = 80.0, min_range: float = 0.5, seed: int = 0) -> RangeImage:
    """Ray-cast ``primitives`` at every bin centre of ``geom``."""
    rng = np.random.default_rng(seed)
    ux, uy, uz = ray_directions(geom)
    r = np.full(geom.shape, np.inf)
    for p in primitives:
        np.minimum(r, p.hit(ux, uy, uz), out=r)
    if noise > 0:
        r = r + rng.normal(0.0, noise, size=r.shape)
    valid = np.isfinite(r) & (r >= min_range) & (r <= max_range)
    if dropout > 0:
        valid &= rng.random(geom.shape) >= dropout
    return RangeImage(geom, np.where(valid, r, RangeImage.EMPTY), valid)


def planar_room(rng: np.random.Generator):
    """Closed room around the sensor with some furniture."""
    lx, ly = rng.uniform(5, 9), rng.uniform(3.5, 6)
    floor, ceil = -rng.uniform(1.0, 1.6), rng.uniform(1.2, 2.0)
    prims = [Box((-lx, -ly, floor), (lx, ly, ceil))]
    for _ in range(int(rng.integers(2, 6))):
        cx, cy = rng.uniform(-lx + 1, lx - 1), rng.uniform(-ly + 1, ly - 1)
        if abs(cx) < 1.2 and abs(cy) < 1.2:
            continue
        sx, sy, sz = rng.uniform(0.4, 1.5), rng.uniform(0.4, 1.0), rng.uniform(0.5, 1.5)
        prims.append(Box((cx - sx / 2, cy - sy / 2, floor), (cx + sx / 2, cy + sy / 2, floor + sz)))
    return prims


def street(rng: np.random.Generator):
    """Road with building facades, poles, parked cars and tree crowns."""
    prims = [Ground(-SENSOR_HEIGHT)]
    for side in (1, -1):
        x = -70.0
        y0 = rng.uniform(7, 11)
        while x < 70:
            length = rng.uniform(8, 25)
            depth = rng.uniform(6, 12)
            height = rng.uniform(6, 20)
            setback = y0 + rng.uniform(-1, 1.5)
            ylo, yhi = (setback, setback + depth) if side > 0 else (-setback - depth, -setback)
            prims.append(Box((x, ylo, -SENSOR_HEIGHT), (x + length, yhi, height)))
            x += length + rng.uniform(0, 6)
        for px in np.arange(-60, 60, rng.uniform(8, 14)):
            prims.append(Cylinder(px + rng.uniform(-1, 1), side * rng.uniform(5, 6.5), 0.12,
                                  -SENSOR_HEIGHT, 4.5))
        for tx in np.arange(-50, 50, rng.uniform(12, 20)):
            ty = side * rng.uniform(5.5, 6.8)
            prims.append(Cylinder(tx, ty, 0.2, -SENSOR_HEIGHT, 1.5))
            prims.append(Sphere((tx, ty, rng.uniform(2.5, 3.5)), rng.uniform(1.2, 2.2)))
        for cx in np.arange(-40, 40, rng.uniform(6, 11)):
            if rng.random() < 0.4:
                continue
            cy = side * rng.uniform(3.2, 4.0)
            prims.append(Box((cx, cy - 0.9, -SENSOR_HEIGHT + 0.15), (cx + 4.3, cy + 0.9, -SENSOR_HEIGHT + 1.5)))
    return prims


def clutter(rng: np.random.Generator):
    """Ground with randomly placed boxes, spheres and columns."""
    prims = [Ground(-SENSOR_HEIGHT)]
    for _ in range(int(rng.integers(15, 40))):
        ang, dist = rng.uniform(0, 2 * np.pi), rng.uniform(3, 40)
        cx, cy = dist * np.cos(ang), dist * np.sin(ang)
        kind = rng.integers(0, 3)
        if kind == 0:
            s = rng.uniform(0.5, 4, size=3)
            prims.append(Box((cx, cy, -SENSOR_HEIGHT), (cx + s[0], cy + s[1], -SENSOR_HEIGHT + s[2])))
        elif kind == 1:
            prims.append(Sphere((cx, cy, rng.uniform(-1, 2)), rng.uniform(0.3, 2)))
        else:
            prims.append(Cylinder(cx, cy, rng.uniform(0.1, 1), -SENSOR_HEIGHT, rng.uniform(1, 8)))
    return prims


def flat_ground(rng: np.random.Generator):
    return [Ground(-SENSOR_HEIGHT)]


SCENES = {"room": planar_room, "street": street, "clutter": clutter, "ground": flat_ground}


def make_scene(kind: str, geom: SensorGeometry, seed: int = 0, *, noise: float = 0.01,
               dropout: float = 0.0, max_range: float = 80.0) -> RangeImage:
    """Generate one of ``room``, ``street``, ``clutter`` or ``ground``."""
    try:
        build = SCENES[kind]
    except KeyError:
        raise ValueError(f"unknown scene {kind!r}; choose from {sorted(SCENES)}") from None
    rng = np.random.default_rng(seed)
    return render(build(rng), geom, noise=noise, dropout=dropout, max_range=max_range, seed=seed + 1)
