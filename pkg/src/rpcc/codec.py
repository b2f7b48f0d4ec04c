"""Frame-level compression pipeline and the ``.rpcc`` frame format.

See FORMAT.md for the byte layout.  The decoder never sees original depths,
so it re-derives cluster labels row by row from already reconstructed rows;
the encoder runs the same derivation and ships an exception list for every
pixel where it disagrees with the true labels.
"""

from __future__ import annotations

import struct
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .backends import BackendId, compress_bytes, decompress_bytes
from .bitstream import Reader, Writer, f32, mask_from_runs, mask_runs, wire_plane
from .config import CodecConfig
from .errors import CorruptFrameError, DecodeError, RpccError
from .geometry import SensorGeometry, ray_directions
from .ground import extract_ground, ground_mask_for
from .modeling import PLANE, POINT, ClusterModel, ModelTable, plane_ray_range, predict, predict_pixels, select_model
from .quantization import decode_codes, dequantize, encode_codes, quantize
from .range_image import RangeImage, add_residual, subtract
from .salience import SalienceMap, accuracy_for_levels, classify_clusters, extract_key_points
from .segmentation import ClusterAssignment, dbscan_baseline, fps_segment, nearest_center


MAGIC = b"RPCC"
VERSION = 1
HEADER = struct.Struct("<4sBBBBfHHdddHIIIIII")
HEADER_SIZE = HEADER.size + 4  # trailing CRC32 of the header fields

MODES = {"uniform": 0, "nonuniform": 1}
FLAG_GROUND = 0x01


@dataclass(frozen=True, eq=False)
class CompressedFrame:
    backend: BackendId
    mode: str
    base_accuracy: float
    geom: SensorGeometry
    cluster_count: int
    valid_count: int
    ground: bool
    info_raw_len: int
    resid_raw_len: int
    checksum: int
    info_payload: bytes
    resid_payload: bytes
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def total_bytes(self) -> int:
        return HEADER_SIZE + len(self.info_payload) + len(self.resid_payload)

    @property
    def info_bytes(self) -> int:
        return HEADER_SIZE + len(self.info_payload)

    @property
    def residual_bytes(self) -> int:
        return len(self.resid_payload)

    def to_bytes(self) -> bytes:
        g = self.geom
        fields = HEADER.pack(
            MAGIC, VERSION, int(self.backend), MODES[self.mode], FLAG_GROUND if self.ground else 0,
            self.base_accuracy, g.height, g.width, g.horizontal_resolution, g.phi_min, g.phi_max,
            self.cluster_count, self.valid_count, self.info_raw_len, len(self.info_payload),
            self.resid_raw_len, len(self.resid_payload), self.checksum,
        )
        return fields + struct.pack("<I", zlib.crc32(fields)) + self.info_payload + self.resid_payload

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["CompressedFrame", int]:
        """Parse one frame starting at ``offset``; returns ``(frame, next_offset)``."""
        data = bytes(data)
        if len(data) - offset < HEADER_SIZE:
            raise CorruptFrameError("truncated frame header")
        fields = data[offset:offset + HEADER.size]
        (magic, version, backend, mode, flags, base, h, w, rho, phi_min, phi_max, k, valid_count,
         info_raw, info_len, resid_raw, resid_len, checksum) = HEADER.unpack(fields)
        if magic != MAGIC:
            raise CorruptFrameError("not an RPCC frame (bad magic)")
        if version != VERSION:
            raise CorruptFrameError(f"unsupported frame version {version}")
        (hcrc,) = struct.unpack_from("<I", data, offset + HEADER.size)
        if hcrc != zlib.crc32(fields):
            raise CorruptFrameError("frame header checksum mismatch")
        try:
            backend = BackendId(backend)
            mode_name = {v: n for n, v in MODES.items()}[mode]
            geom = SensorGeometry(h, rho, phi_min, phi_max)
        except (ValueError, KeyError) as exc:
            raise CorruptFrameError(f"invalid header field: {exc}") from None
        if geom.width != w:
            raise CorruptFrameError("header width disagrees with horizontal resolution")
        start = offset + HEADER_SIZE
        end = start + info_len + resid_len
        if end > len(data):
            raise CorruptFrameError("truncated frame payload")
        frame = cls(backend, mode_name, base, geom, k, valid_count, bool(flags & FLAG_GROUND),
                    info_raw, resid_raw, checksum, data[start:start + info_len],
                    data[start + info_len:end])
        return frame, end


def read_frames(data: bytes) -> list[CompressedFrame]:
    """Split a ``.rpcc`` byte string into frames."""
    frames, pos = [], 0
    while pos < len(data):
        frame, pos = CompressedFrame.from_bytes(data, pos)
        frames.append(frame)
    if not frames:
        raise CorruptFrameError("empty .rpcc stream")
    return frames


# --- decoder-side label rebuild -------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrameModel:
    """Everything both sides know once info data is decoded."""

    geom: SensorGeometry
    ground_plane: tuple | None
    ground_threshold: float
    centers: np.ndarray
    table: ModelTable
    fallback: np.ndarray
    levels: np.ndarray
    accuracies: np.ndarray

    @property
    def unit_centers(self) -> np.ndarray:
        norm = np.sqrt(self.centers[:, 0] * self.centers[:, 0] + self.centers[:, 1] * self.centers[:, 1]
                       + self.centers[:, 2] * self.centers[:, 2])
        return self.centers / np.where(norm > 0, norm, 1.0)[:, None]


def rebuild_labels(fm: FrameModel, ux, uy, uz, anchor_label, anchor_depth, unit_centers=None):
    """Labels the decoder derives for pixels, given each pixel's anchor.

    The anchor is the nearest valid pixel above in the same column (already
    reconstructed); ``anchor_label`` is -1 where there is none.  A proxy
    point is placed on the pixel's ray: the anchor's plane continued along
    the ray, else the anchor's depth, else (no anchor) the ground plane hit.
    The proxy is labelled ground if it lies within the ground threshold,
    otherwise by nearest centre.  Pixels with no proxy at all take the
    centre closest in direction.
    """
    n = len(ux)
    if len(fm.centers) == 0:
        return np.zeros(n, dtype=np.int32)
    proxy = np.full(n, np.nan)
    has = anchor_label >= 0
    if has.any():
        al = anchor_label[has]
        r = anchor_depth[has].astype(np.float64)
        pl = fm.table.is_plane[al]
        if pl.any():
            rc, ok = plane_ray_range(fm.table.planes[al[pl]], ux[has][pl], uy[has][pl], uz[has][pl])
            r[pl] = np.where(ok, rc, r[pl])
        proxy[has] = r
    gp = fm.ground_plane
    if gp is not None and (~has).any():
        rows = np.broadcast_to(np.asarray(gp), (int((~has).sum()), 4))
        rc, ok = plane_ray_range(rows, ux[~has], uy[~has], uz[~has])
        proxy[~has] = np.where(ok, rc, np.nan)
    known = np.isfinite(proxy)
    x, y, z = proxy * ux, proxy * uy, proxy * uz
    labels = np.zeros(n, dtype=np.int32)
    is_ground = np.zeros(n, dtype=bool)
    if gp is not None:
        a, b, c, d = gp
        with np.errstate(invalid="ignore"):
            is_ground = known & (np.abs(x * a + y * b + z * c + d) <= fm.ground_threshold)
    near = known & ~is_ground
    labels[near] = nearest_center(x[near], y[near], z[near], fm.centers) + 1
    far = ~known
    if far.any():
        uc = fm.unit_centers if unit_centers is None else unit_centers
        labels[far] = nearest_center(ux[far], uy[far], uz[far], uc) + 1
    return labels


def _anchors(valid: np.ndarray, labels: np.ndarray, depths: np.ndarray):
    """Per-pixel anchor label and depth from the nearest valid pixel above."""
    h, w = valid.shape
    rows = np.where(valid, np.arange(h)[:, None], -1)
    last = np.maximum.accumulate(rows, axis=0)
    above = np.vstack([np.full((1, w), -1), last[:-1]])
    cols = np.broadcast_to(np.arange(w), (h, w))
    has = above >= 0
    anchor_label = np.full((h, w), -1, dtype=np.int32)
    anchor_depth = np.zeros((h, w))
    anchor_label[has] = labels[above[has], cols[has]]
    anchor_depth[has] = depths[above[has], cols[has]]
    return anchor_label, anchor_depth


# --- encoder --------------------------------------------------------------------

def _segment(img, cfg, ground_mask) -> ClusterAssignment:
    if cfg.segmentation == "dbscan":
        return dbscan_baseline(img, cfg.dbscan_eps, cfg.dbscan_min_pts, ground_mask)
    return fps_segment(img, cfg.cluster_count, ground_mask, cfg.fps_sample_cap)


def _wire_model(model: ClusterModel) -> ClusterModel:
    if model.is_plane:
        plane = wire_plane(model.plane)
        if plane is not None:
            return ClusterModel.of_plane(plane, f32(model.point_r))
    return ClusterModel.point(f32(model.point_r))


@dataclass(frozen=True, eq=False)
class EncodedFrame:
    frame: CompressedFrame
    labels: np.ndarray  # encoder's cluster label per pixel, -1 where invalid
    accuracies: np.ndarray  # quantization step per label


def compress(img: RangeImage, cfg: CodecConfig = CodecConfig()) -> CompressedFrame:
    """Encode one range image into a frame."""
    return compress_detailed(img, cfg).frame


def compress_detailed(img: RangeImage, cfg: CodecConfig = CodecConfig()) -> EncodedFrame:
    cfg = cfg.validate()
    t0 = time.perf_counter()
    backend = BackendId.parse(cfg.backend)
    base = f32(cfg.base_accuracy)
    geom = img.geom
    if img.valid_count == 0:
        frame = CompressedFrame(backend, cfg.mode, base, geom, 0, 0, False, 0, 0, zlib.crc32(b""), b"", b"",
                                {"mean_abs_residual": 0.0, "exceptions": 0})
        return EncodedFrame(frame, np.full(geom.shape, -1, dtype=np.int32), np.zeros(0))
    pts = img.points()

    ground = extract_ground(img, cfg.ground_ransac)
    ground_plane, ground_thr = None, f32(cfg.ground_ransac.threshold)
    ground_mask = np.zeros(geom.shape, dtype=bool)
    if ground.found:
        ground_plane = wire_plane(ground.plane)
        if ground_plane is not None:
            ground_mask = ground_mask_for(img, pts, ground_plane, ground_thr)
        if not ground_mask.any():
            ground_plane = None

    seg = _segment(img, cfg, ground_mask)
    labels, centers = seg.labels, seg.centers
    k = len(centers)
    if k > 0xFFFF:
        raise RpccError(f"{k} clusters exceed the frame limit of 65535")
    flat_labels = labels[img.valid]

    models: list[ClusterModel] = [ClusterModel.point(0.0)] * (k + 1)
    if ground_plane is not None:
        gpts = pts[flat_labels == 0]
        models[0] = ClusterModel.of_plane(ground_plane, f32(np.linalg.norm(gpts, axis=1).mean()))
    order = np.argsort(flat_labels, kind="stable")
    bounds = np.searchsorted(flat_labels[order], np.arange(k + 2))
    for lab in range(1, k + 1):
        members = pts[order[bounds[lab]:bounds[lab + 1]]]
        if len(members):
            models[lab] = _wire_model(select_model(members, cfg))
    table = ModelTable.from_models(models)
    predicted, fallback = predict(geom, labels, table)

    if cfg.mode == "nonuniform":
        keys = extract_key_points(img, cfg.salience)
        sal = classify_clusters(labels, keys, base, k + 1)
    else:
        sal = SalienceMap.uniform(k + 1, base)
    accuracies = accuracy_for_levels(sal.levels, base)

    residual = subtract(img, predicted)
    q = quantize(residual, accuracies, labels)
    recon, clamped = add_residual(predicted, dequantize(q, labels))

    fm = FrameModel(geom, ground_plane, ground_thr, centers, table, fallback, sal.levels, accuracies)
    ux, uy, uz = ray_directions(geom)
    anchor_label, anchor_depth = _anchors(img.valid, labels, recon.depths)
    v = img.valid
    rebuilt = rebuild_labels(fm, ux[v], uy[v], uz[v], anchor_label[v], anchor_depth[v])
    exceptions = np.flatnonzero(rebuilt != flat_labels)

    info_raw = _write_info(fm, img.valid, exceptions, flat_labels[exceptions])
    resid_raw = encode_codes(q.codes)
    t1 = time.perf_counter()
    info_payload = compress_bytes(backend, info_raw)
    resid_payload = compress_bytes(backend, resid_raw)
    t2 = time.perf_counter()
    stats = {
        "mean_abs_residual": float(np.abs(residual.values[img.valid]).mean()),
        "exceptions": int(len(exceptions)),
        "clusters": k,
        "plane_clusters": int(table.is_plane[1:].sum()),
        "fallback_clusters": int(fallback.sum()),
        "ground_points": int(ground_mask.sum()),
        "clamped": clamped,
        "levels": np.bincount(sal.levels[1:], minlength=4).tolist() if k else [0, 0, 0, 0],
        "model_ms": (t1 - t0) * 1e3,
        "entropy_encode_ms": (t2 - t1) * 1e3,
    }
    frame = CompressedFrame(backend, cfg.mode, base, geom, k, img.valid_count, ground_plane is not None,
                            len(info_raw), len(resid_raw), zlib.crc32(info_raw + resid_raw),
                            info_payload, resid_payload, stats)
    return EncodedFrame(frame, labels, accuracies)


def _flags_byte(tag: int, fallback: bool, level: int) -> int:
    return tag | (int(fallback) << 1) | (int(level) << 2)


def _write_info(fm: FrameModel, valid, exceptions, exception_labels) -> bytes:
    w = Writer()
    t = fm.table
    if fm.ground_plane is not None:
        w.plane(fm.ground_plane)
        w.pack("f", fm.ground_threshold)
        w.pack("B", _flags_byte(PLANE, fm.fallback[0], 3))
        if fm.fallback[0]:
            w.pack("f", t.point_r[0])
    for c in fm.centers:
        w.pack("fff", *c)
    for lab in range(1, len(fm.centers) + 1):
        tag = PLANE if t.is_plane[lab] else POINT
        fb = bool(fm.fallback[lab]) and tag == PLANE
        w.pack("B", _flags_byte(tag, fb, fm.levels[lab]))
        if tag == PLANE:
            w.plane(t.planes[lab])
            if fb:
                w.pack("f", t.point_r[lab])
        else:
            w.pack("f", t.point_r[lab])
    runs = mask_runs(valid)
    w.varints([len(runs)])
    w.varints(runs)
    w.varints([len(exceptions)])
    if len(exceptions):
        gaps = np.diff(np.concatenate([[-1], exceptions])) - 1
        pairs = np.empty(2 * len(exceptions), dtype=np.uint64)
        pairs[0::2] = gaps
        pairs[1::2] = exception_labels
        w.varints(pairs)
    return w.getvalue()


# --- decoder --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DecodedFrame:
    image: RangeImage
    labels: np.ndarray
    accuracies: np.ndarray  # per label
    clamped: int

    def pixel_accuracy(self) -> np.ndarray:
        """Quantization step of every valid pixel, row-major."""
        return self.accuracies[self.labels[self.image.valid]]


def _read_info(frame: CompressedFrame, raw: bytes):
    geom, k = frame.geom, frame.cluster_count
    r = Reader(raw)
    is_plane = np.zeros(k + 1, dtype=bool)
    point_r = np.full(k + 1, np.nan)
    planes = np.zeros((k + 1, 4))
    fallback = np.zeros(k + 1, dtype=bool)
    levels = np.full(k + 1, 3, dtype=np.int64)
    ground_plane, ground_thr = None, 0.0
    if frame.ground:
        ground_plane = r.plane()
        ground_thr = float(r.unpack("f"))
        flags = r.unpack("B")
        is_plane[0] = True
        planes[0] = ground_plane
        if flags & 2:
            fallback[0] = True
            point_r[0] = float(r.unpack("f"))
    centers = np.array([r.unpack("fff") for _ in range(k)], dtype=np.float64).reshape(-1, 3)
    for lab in range(1, k + 1):
        flags = r.unpack("B")
        levels[lab] = (flags >> 2) & 3
        if flags & 1:
            is_plane[lab] = True
            planes[lab] = r.plane()
            if flags & 2:
                fallback[lab] = True
                point_r[lab] = float(r.unpack("f"))
        else:
            point_r[lab] = float(r.unpack("f"))
    nruns = r.varint()
    valid = mask_from_runs(r.varints(nruns), geom.shape)
    nexc = r.varint()
    pairs = r.varints(2 * nexc).astype(np.int64)
    if not r.done():
        raise CorruptFrameError("trailing bytes in info data")
    exceptions = np.cumsum(pairs[0::2] + 1) - 1
    exc_labels = pairs[1::2]
    if int(valid.sum()) != frame.valid_count:
        raise CorruptFrameError("validity mask disagrees with header point count")
    if len(exceptions) and (exceptions[-1] >= frame.valid_count or exc_labels.max() > k):
        raise CorruptFrameError("exception entry out of range")
    table = ModelTable(is_plane, point_r, planes)
    accuracies = accuracy_for_levels(levels, frame.base_accuracy)
    fm = FrameModel(geom, ground_plane, ground_thr, centers, table, fallback, levels, accuracies)
    return fm, valid, exceptions, exc_labels


def decompress_detailed(frame: CompressedFrame) -> DecodedFrame:
    geom = frame.geom
    if frame.valid_count == 0:
        if frame.info_payload or frame.resid_payload:
            raise CorruptFrameError("empty frame carries payload bytes")
        return DecodedFrame(RangeImage.empty(geom), np.full(geom.shape, -1, dtype=np.int32),
                            np.zeros(0), 0)
    try:
        info_raw = decompress_bytes(frame.backend, frame.info_payload)
        resid_raw = decompress_bytes(frame.backend, frame.resid_payload)
    except DecodeError as exc:
        raise CorruptFrameError(f"payload failed to decode: {exc}") from exc
    if len(info_raw) != frame.info_raw_len or len(resid_raw) != frame.resid_raw_len:
        raise CorruptFrameError("decoded payload length mismatch")
    if zlib.crc32(info_raw + resid_raw) != frame.checksum:
        raise CorruptFrameError("payload checksum mismatch")
    fm, valid, exceptions, exc_labels = _read_info(frame, info_raw)
    try:
        codes = decode_codes(resid_raw, frame.valid_count)
    except DecodeError as exc:
        raise CorruptFrameError(str(exc)) from exc

    override = np.full(frame.valid_count, -1, dtype=np.int64)
    override[exceptions] = exc_labels
    ux, uy, uz = ray_directions(geom)
    unit_centers = fm.unit_centers
    labels = np.full(geom.shape, -1, dtype=np.int32)
    depths = np.full(geom.shape, RangeImage.EMPTY)
    anchor_label = np.full(geom.width, -1, dtype=np.int32)
    anchor_depth = np.zeros(geom.width)
    clamped = 0
    offset = 0
    for row in range(geom.height):
        cols = np.flatnonzero(valid[row])
        if len(cols) == 0:
            continue
        sl = slice(offset, offset + len(cols))
        offset += len(cols)
        rx, ry, rz = ux[row, cols], uy[row, cols], uz[row, cols]
        lab = rebuild_labels(fm, rx, ry, rz, anchor_label[cols], anchor_depth[cols], unit_centers)
        ov = override[sl]
        lab = np.where(ov >= 0, ov, lab).astype(np.int32)
        r_hat, fell_back = predict_pixels(lab, rx, ry, rz, fm.table)
        if fell_back.any() and not fm.fallback[lab[fell_back]].all():
            raise CorruptFrameError("prediction fell back in a cluster without a fallback value")
        if np.isnan(r_hat).any():
            raise CorruptFrameError("pixel assigned to a cluster without a model")
        rec = r_hat + codes[sl] * fm.accuracies[lab]
        neg = rec < 0
        clamped += int(neg.sum())
        rec = np.where(neg, 0.0, rec)
        labels[row, cols] = lab
        depths[row, cols] = rec
        anchor_label[cols] = lab
        anchor_depth[cols] = rec
    return DecodedFrame(RangeImage(geom, depths, valid), labels, fm.accuracies, clamped)


def decompress(frame: CompressedFrame) -> RangeImage:
    return decompress_detailed(frame).image


def decoder_side_segmentation_rebuild(frame: CompressedFrame) -> np.ndarray:
    """Final per-pixel labels as the decoder reconstructs them (exceptions applied)."""
    return decompress_detailed(frame).labels
