"""Command-line interface: ``rpcc compress|decompress|evaluate|bench|sweep|gen-scene``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path


from . import codec, experiments
from .backends import BackendId
from .config import (MODELINGS, MODES, SEGMENTATIONS, SENSOR_PRESETS, CodecConfig, RansacConfig,
                     SalienceConfig, sensor_geometry)
from .errors import ConfigError, CorruptFrameError, ParseError, RpccError
from .io import FORMATS, guess_format, read_scan, write_points, write_rimg
from .metrics import DEFAULT_PEAK, DEFAULT_TAU, per_cluster_errors, quality_report, rate_report
from .range_image import RangeImage
from .scenes import SCENES, make_scene

log = logging.getLogger("rpcc")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_CORRUPT = 4
EXIT_IO = 5


def _add_sensor_args(p):
    g = p.add_argument_group("sensor")
    g.add_argument("--sensor", default="hdl64e", choices=sorted(SENSOR_PRESETS) + ["custom"])
    g.add_argument("--beams", type=int, help="number of beams (rows)")
    g.add_argument("--hres", type=float, help="horizontal resolution, degrees")
    g.add_argument("--phi-min", type=float, help="lowest elevation, degrees")
    g.add_argument("--phi-max", type=float, help="highest elevation, degrees")


def _geom(args):
    return sensor_geometry(args.sensor, num_beams=args.beams, horizontal_resolution=args.hres,
                           phi_min=args.phi_min, phi_max=args.phi_max)


def _add_codec_args(p):
    g = p.add_argument_group("codec")
    g.add_argument("--mode", default="uniform", choices=MODES)
    g.add_argument("--accuracy", type=float, default=0.02, help="base quantization accuracy, metres")
    g.add_argument("--clusters", type=int, default=100)
    g.add_argument("--backend", default="BWT", help="LZ_FAST, DEFLATE, BWT or ARITHMETIC")
    g.add_argument("--segmentation", default="fps", choices=SEGMENTATIONS)
    g.add_argument("--eps", type=float, default=2.0, help="DBSCAN neighbour distance")
    g.add_argument("--min-pts", type=int, default=5, help="DBSCAN core point size")
    g.add_argument("--modeling", default="plane_point", choices=MODELINGS)
    g.add_argument("--ransac-iterations", type=int, default=100)
    g.add_argument("--ransac-threshold", type=float, default=0.15)
    g.add_argument("--ground-z-max", type=float, help="absolute ground candidate height cut")
    g.add_argument("--edge-threshold", type=float, default=0.10)
    g.add_argument("--planar-threshold", type=float, default=0.002)
    g.add_argument("--seed", type=int, default=0)


def _codec_config(args) -> CodecConfig:
    ransac = RansacConfig(args.ransac_iterations, args.ransac_threshold, args.seed, args.ground_z_max)
    return CodecConfig(
        mode=args.mode, base_accuracy=args.accuracy, cluster_count=args.clusters, backend=args.backend,
        segmentation=args.segmentation, dbscan_eps=args.eps, dbscan_min_pts=args.min_pts,
        modeling=args.modeling, ground_ransac=ransac, plane_ransac=replace(ransac, ground_z_max=None),
        salience=SalienceConfig(edge_threshold=args.edge_threshold, planar_threshold=args.planar_threshold),
    ).validate()


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, default=float)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _load_points(path, fmt):
    scan = read_scan(path, fmt)
    return scan.points() if isinstance(scan, RangeImage) else scan


def cmd_compress(args):
    cfg = _codec_config(args)
    geom = _geom(args)
    out = bytearray()
    reports = []
    for path in args.inputs:
        img, dropped = experiments.load_image(path, geom, args.format)
        frame = codec.compress(img, cfg)
        out += frame.to_bytes()
        rep = rate_report(frame, img.valid_count).to_dict() if img.valid_count else {}
        reports.append({
            "input": str(path), "points": img.valid_count, "dropped": dropped, "bytes": frame.total_bytes,
            "bpp": rep.get("bpp"), "compression_ratio": rep.get("compression_ratio"),
            "info_bpp": rep.get("info_bpp"), "residual_bpp": rep.get("residual_bpp"),
            "exceptions": frame.stats.get("exceptions", 0),
        })
        if dropped:
            log.warning("%s: %d points dropped by projection", path, dropped)
    Path(args.output).write_bytes(bytes(out))
    _emit_json({"output": str(args.output), "config": cfg.label(), "frames": reports}, args.report)
    return EXIT_OK


def _frame_path(base: Path, i: int, n: int) -> Path:
    return base if n == 1 else base.with_name(f"{base.stem}_{i:04d}{base.suffix}")


def cmd_decompress(args):
    frames = codec.read_frames(Path(args.input).read_bytes())
    out = Path(args.output)
    fmt = args.format or guess_format(out)
    written = []
    for i, frame in enumerate(frames):
        img = codec.decompress(frame)
        path = _frame_path(out, i, len(frames))
        if fmt == "rimg":
            write_rimg(path, img)
        else:
            write_points(path, img.points(), fmt)
        written.append({"output": str(path), "points": img.valid_count})
    _emit_json({"frames": written})
    return EXIT_OK


def cmd_evaluate(args):
    orig = _load_points(args.original, args.format)
    recon = _load_points(args.reconstructed, args.recon_format)
    report = None
    if args.compressed:
        frames = codec.read_frames(Path(args.compressed).read_bytes())
        total = sum(f.total_bytes for f in frames)
        report = rate_report(frames[0], len(orig))
        report.bpp = 8.0 * total / len(orig)
        report.compression_ratio = 96.0 / report.bpp
        if len(frames) == 1:
            orig_scan = read_scan(args.original, args.format)
            if isinstance(orig_scan, RangeImage):
                dec = codec.decompress_detailed(frames[0])
                report.per_cluster = per_cluster_errors(dec.labels, orig_scan.depths, dec.image.depths,
                                                        dec.accuracies)
    report = quality_report(orig, recon, tau=args.tau, peak=args.peak, report=report)
    _emit_json(report.to_dict(), args.report)
    return EXIT_OK


def _bench_image(args):
    if args.input:
        img, _ = experiments.load_image(args.input, _geom(args), args.format)
        return img
    return make_scene("street", _geom(args), seed=args.seed)


def cmd_bench(args):
    img = _bench_image(args)
    backends = [BackendId.parse(b) for b in args.backends.split(",")]
    rows = experiments.bench_backends(img, _codec_config(args), repeat=args.repeat, backends=backends)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            experiments.write_csv(rows, experiments.BENCH_FIELDS, fh)
    experiments.write_csv(rows, experiments.BENCH_FIELDS, sys.stdout)
    return EXIT_OK


def _csv_list(value, cast=str):
    return [cast(v) for v in value.split(",")] if value else None


def cmd_sweep(args):
    files = experiments.corpus_files(args.corpus)
    if not files:
        raise ConfigError(f"no scans found in {args.corpus}")
    base = _codec_config(args)
    configs = experiments.config_grid(
        base,
        segmentation=_csv_list(args.segmentations),
        cluster_count=_csv_list(args.cluster_grid, int),
        modeling=_csv_list(args.modelings),
        mode=_csv_list(args.modes),
        backend=_csv_list(args.backends),
        base_accuracy=_csv_list(args.accuracies, float),
    )
    rows = experiments.sweep(files, configs, _geom(args), args.format, jobs=args.jobs)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            experiments.write_csv(rows, experiments.SWEEP_FIELDS, fh)
    else:
        experiments.write_csv(rows, experiments.SWEEP_FIELDS, sys.stdout)
    return EXIT_OK


def cmd_gen_scene(args):
    geom = _geom(args)
    img = make_scene(args.kind, geom, seed=args.seed, noise=args.noise, dropout=args.dropout)
    fmt = args.format or guess_format(args.output)
    if fmt == "rimg":
        write_rimg(args.output, img)
    else:
        write_points(args.output, img.points(), fmt)
    _emit_json({"output": str(args.output), "points": img.valid_count, "shape": list(geom.shape)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rpcc", description="Range-image LiDAR point cloud codec")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="encode scans into an .rpcc file")
    p.add_argument("inputs", nargs="+", type=Path)
    p.add_argument("-o", "--output", required=True, type=Path)
    p.add_argument("--format", choices=FORMATS, help="input format (default: from extension)")
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    _add_sensor_args(p)
    _add_codec_args(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="decode an .rpcc file")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", required=True, type=Path)
    p.add_argument("--format", choices=FORMATS, help="output format (default: from extension)")
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("evaluate", help="quality report for an original/reconstruction pair")
    p.add_argument("original", type=Path)
    p.add_argument("reconstructed", type=Path)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--recon-format", choices=FORMATS)
    p.add_argument("--compressed", type=Path, help=".rpcc file to report the rate of")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--peak", type=float, default=DEFAULT_PEAK)
    p.add_argument("--report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="time the entropy backends on one frame")
    p.add_argument("input", nargs="?", type=Path, help="scan to use (default: synthetic street)")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--backends", default=",".join(b.name for b in BackendId))
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("-o", "--output", help="also write the CSV here")
    _add_sensor_args(p)
    _add_codec_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="run a config grid over a directory of scans")
    p.add_argument("corpus", type=Path)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--segmentations", help="comma list, e.g. fps,dbscan")
    p.add_argument("--cluster-grid", help="comma list of cluster counts")
    p.add_argument("--modelings", help="comma list, e.g. point_only,plane_point")
    p.add_argument("--modes", help="comma list, e.g. uniform,nonuniform")
    p.add_argument("--backends", help="comma list of backends")
    p.add_argument("--accuracies", help="comma list of base accuracies")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--output", help="CSV path (default: stdout)")
    _add_sensor_args(p)
    _add_codec_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-scene", help="write a synthetic scan")
    p.add_argument("kind", choices=sorted(SCENES))
    p.add_argument("-o", "--output", required=True, type=Path)
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.01, help="range noise sigma, metres")
    p.add_argument("--dropout", type=float, default=0.0, help="fraction of pixels dropped")
    _add_sensor_args(p)
    p.set_defaults(func=cmd_gen_scene)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except ParseError as exc:
        log.error("%s", exc)
        return EXIT_PARSE
    except CorruptFrameError as exc:
        log.error("corrupt frame: %s", exc)
        return EXIT_CORRUPT
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (RpccError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
