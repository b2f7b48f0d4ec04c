"""Backend timing bench and configuration sweeps over a scan corpus."""

from __future__ import annotations

import csv
import itertools
import logging
import time
from dataclasses import replace
from pathlib import Path

from . import codec
from .backends import BackendId, compress_bytes, decompress_bytes
from .config import CodecConfig
from .geometry import SensorGeometry, cloud_to_range_image
from .io import read_scan
from .metrics import chamfer_sym
from .range_image import RangeImage

log = logging.getLogger(__name__)

BENCH_FIELDS = ["backend", "raw_bytes", "compressed_bytes", "encode_ms", "decode_ms"]
SWEEP_FIELDS = [
    "file", "config", "segmentation", "clusters", "modeling", "mode", "backend", "base_accuracy",
    "points", "info_bpp", "residual_bpp", "total_bpp", "compression_ratio", "mean_abs_residual",
    "cd_sym", "exceptions", "encode_ms", "decode_ms",
]


def frame_streams(img: RangeImage, cfg: CodecConfig = CodecConfig()) -> list[bytes]:
    """The raw (pre-entropy) info and residual streams the codec would emit."""
    frame = codec.compress(img, replace(cfg, backend="LZ_FAST"))
    return [decompress_bytes(frame.backend, frame.info_payload),
            decompress_bytes(frame.backend, frame.resid_payload)]


def _best_time(fn, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t)
    return best * 1e3, result


def bench_backends(img: RangeImage, cfg: CodecConfig = CodecConfig(), repeat: int = 5,
                   backends=tuple(BackendId)) -> list[dict]:
    """Time each backend on the same frame's info + residual streams (best of ``repeat``)."""
    streams = frame_streams(img, cfg)
    rows = []
    for b in backends:
        b = BackendId.parse(b)
        reps = 1 if b == BackendId.ARITHMETIC else repeat
        enc_ms, payloads = _best_time(lambda: [compress_bytes(b, s) for s in streams], reps)
        dec_ms, decoded = _best_time(lambda: [decompress_bytes(b, p) for p in payloads], reps)
        assert decoded == streams
        rows.append({
            "backend": b.name, "raw_bytes": sum(map(len, streams)),
            "compressed_bytes": sum(map(len, payloads)), "encode_ms": enc_ms, "decode_ms": dec_ms,
        })
    return rows


def load_image(path, geom: SensorGeometry, fmt: str | None = None) -> tuple[RangeImage, int]:
    scan = read_scan(path, fmt)
    if isinstance(scan, RangeImage):
        return scan, 0
    return cloud_to_range_image(scan, geom)


def run_config(img: RangeImage, cfg: CodecConfig) -> dict:
    t = time.perf_counter()
    frame = codec.compress(img, cfg)
    enc_ms = (time.perf_counter() - t) * 1e3
    t = time.perf_counter()
    decoded = codec.decompress(frame)
    dec_ms = (time.perf_counter() - t) * 1e3
    n = max(img.valid_count, 1)
    total_bpp = 8.0 * frame.total_bytes / n
    cd = chamfer_sym(img.points(), decoded.points()) if img.valid_count else 0.0
    return {
        "config": cfg.label(), "segmentation": cfg.segmentation,
        "clusters": frame.cluster_count, "modeling": cfg.modeling, "mode": cfg.mode,
        "backend": BackendId.parse(cfg.backend).name, "base_accuracy": cfg.base_accuracy,
        "points": img.valid_count, "info_bpp": 8.0 * frame.info_bytes / n,
        "residual_bpp": 8.0 * frame.residual_bytes / n, "total_bpp": total_bpp,
        "compression_ratio": 96.0 / total_bpp if total_bpp else float("inf"),
        "mean_abs_residual": frame.stats.get("mean_abs_residual", 0.0), "cd_sym": cd,
        "exceptions": frame.stats.get("exceptions", 0), "encode_ms": enc_ms, "decode_ms": dec_ms,
    }


def config_grid(base: CodecConfig = CodecConfig(), **axes) -> list[CodecConfig]:
    """Cartesian product of CodecConfig field values, e.g. ``modeling=["point_only", "plane_point"]``."""
    axes = {k: v for k, v in axes.items() if v}
    if not axes:
        return [base]
    keys = list(axes)
    return [replace(base, **dict(zip(keys, combo))).validate()
            for combo in itertools.product(*(axes[k] for k in keys))]


def _sweep_file(args):
    path, geom, fmt, configs = args
    try:
        img, _ = load_image(path, geom, fmt)
    except Exception as exc:  # per-file failures must not stop the sweep
        log.error("skipping %s: %s", path, exc)
        return []
    rows = []
    for cfg in configs:
        try:
            rows.append({"file": str(path), **run_config(img, cfg)})
        except Exception as exc:
            log.error("%s with %s failed: %s", path, cfg.label(), exc)
    return rows


def sweep(files, configs, geom: SensorGeometry, fmt: str | None = None, jobs: int = 1) -> list[dict]:
    tasks = [(f, geom, fmt, configs) for f in files]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_file, tasks))
    else:
        results = [_sweep_file(t) for t in tasks]
    return [row for rows in results for row in rows]


def corpus_files(corpus_dir) -> list[Path]:
    exts = {".bin", ".xyz", ".txt", ".rimg"}
    return sorted(p for p in Path(corpus_dir).iterdir() if p.suffix.lower() in exts and p.is_file())


def write_csv(rows, fields, stream):
    writer = csv.DictWriter(stream, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})

