"""Scan readers and writers: KITTI ``.bin``, whitespace xyz text, native ``.rimg``."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .geometry import SensorGeometry
from .range_image import RangeImage

FORMATS = ("kitti_bin", "xyz_text", "rimg")
_EXT = {".bin": "kitti_bin", ".xyz": "xyz_text", ".txt": "xyz_text", ".rimg": "rimg"}

RIMG_MAGIC = b"RIMG"
RIMG_HEADER = struct.Struct("<4sBHHddd")


def guess_format(path) -> str:
    try:
        return _EXT[Path(path).suffix.lower()]
    except KeyError:
        raise ParseError(f"cannot infer scan format from {path}; pass one of {FORMATS}") from None


def read_scan(path, fmt: str | None = None):
    """Read points (an (N, 3) array) or, for ``rimg``, a :class:`RangeImage`."""
    fmt = fmt or guess_format(path)
    data = Path(path).read_bytes()
    if fmt == "kitti_bin":
        return parse_kitti_bin(data)
    if fmt == "xyz_text":
        return parse_xyz_text(data)
    if fmt == "rimg":
        return parse_rimg(data)
    raise ParseError(f"unknown scan format {fmt!r}")


def parse_kitti_bin(data: bytes) -> np.ndarray:
    if len(data) % 16:
        raise ParseError("KITTI scan size is not a multiple of 16 bytes", len(data) - len(data) % 16)
    pts = np.frombuffer(data, dtype="<f4").reshape(-1, 4)[:, :3].astype(np.float64)
    bad = ~np.isfinite(pts).all(axis=1)
    if bad.any():
        raise ParseError("non-finite coordinate", int(np.flatnonzero(bad)[0]) * 16)
    return pts


def parse_xyz_text(data: bytes) -> np.ndarray:
    rows = []
    offset = 0
    for line in data.splitlines(keepends=True):
        fields = line.split()
        if fields and not fields[0].startswith(b"#"):
            if len(fields) < 3:
                raise ParseError("expected x y z", offset)
            try:
                xyz = [float(v) for v in fields[:3]]
            except ValueError:
                raise ParseError("non-numeric coordinate", offset) from None
            if not all(np.isfinite(xyz)):
                raise ParseError("non-finite coordinate", offset)
            rows.append(xyz)
        offset += len(line)
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def parse_rimg(data: bytes) -> RangeImage:
    if len(data) < RIMG_HEADER.size:
        raise ParseError("truncated rimg header", len(data))
    magic, version, h, w, rho, phi_min, phi_max = RIMG_HEADER.unpack_from(data)
    if magic != RIMG_MAGIC or version != 1:
        raise ParseError("not a version 1 rimg file", 0)
    try:
        geom = SensorGeometry(h, rho, phi_min, phi_max)
    except ValueError as exc:
        raise ParseError(f"bad rimg geometry: {exc}", 5) from None
    if geom.shape != (h, w):
        raise ParseError("rimg width disagrees with its resolution", 7)
    n = h * w
    mask_len = (n + 7) // 8
    expected = RIMG_HEADER.size + 8 * n + mask_len
    if len(data) != expected:
        raise ParseError(f"rimg should be {expected} bytes, got {len(data)}", min(len(data), expected))
    depths = np.frombuffer(data, dtype="<f8", count=n, offset=RIMG_HEADER.size).reshape(h, w)
    bits = np.frombuffer(data, dtype=np.uint8, offset=RIMG_HEADER.size + 8 * n)
    valid = np.unpackbits(bits, count=n).astype(bool).reshape(h, w)
    try:
        return RangeImage(geom, depths, valid)
    except ValueError as exc:
        raise ParseError(f"bad rimg depths: {exc}", RIMG_HEADER.size) from None


def rimg_bytes(img: RangeImage) -> bytes:
    g = img.geom
    head = RIMG_HEADER.pack(RIMG_MAGIC, 1, g.height, g.width, g.horizontal_resolution, g.phi_min, g.phi_max)
    return head + img.depths.astype("<f8").tobytes() + np.packbits(img.valid.ravel()).tobytes()


def write_points(path, points, fmt: str | None = None):
    fmt = fmt or guess_format(path)
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if fmt == "kitti_bin":
        out = np.zeros((len(pts), 4), dtype="<f4")
        out[:, :3] = pts
        Path(path).write_bytes(out.tobytes())
    elif fmt == "xyz_text":
        np.savetxt(path, pts, fmt="%.17g")
    else:
        raise ParseError(f"cannot write points as {fmt!r}")


def write_rimg(path, img: RangeImage):
    Path(path).write_bytes(rimg_bytes(img))
