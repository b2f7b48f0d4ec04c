"""Codec configuration and sensor presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .errors import ConfigError
from .geometry import SensorGeometry

SENSOR_PRESETS = {
    "vlp16": SensorGeometry(16, 0.2, -15.0, 15.0),
    "hdl32e": SensorGeometry(32, 0.16, -30.67, 10.67),
    "hdl64e": SensorGeometry(64, 0.18, -24.8, 2.0),
}


def sensor_geometry(preset: str, **overrides) -> SensorGeometry:
    """Look up a preset; keyword overrides replace individual fields.

    ``preset="custom"`` requires all four fields as overrides.
    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if preset == "custom":
        try:
            return SensorGeometry(**overrides)
        except TypeError as exc:
            raise ConfigError(f"custom sensor needs num_beams, horizontal_resolution, phi_min, phi_max: {exc}") from None
    try:
        base = SENSOR_PRESETS[preset]
    except KeyError:
        raise ConfigError(f"unknown sensor preset {preset!r}") from None
    return replace(base, **overrides)


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 100
    threshold: float = 0.15  # inlier distance, metres
    seed: int = 0
    # ground only: candidate points must lie at or below this z; None picks
    # the 25th percentile of z
    ground_z_max: float | None = None
    ground_max_tilt: float = 20.0  # degrees between ground normal and +z

    def validate(self):
        if self.iterations < 1:
            raise ConfigError("RANSAC iterations must be >= 1")
        if not self.threshold > 0:
            raise ConfigError("RANSAC threshold must be > 0")


@dataclass(frozen=True)
class SalienceConfig:
    edge_threshold: float = 0.10
    planar_threshold: float = 0.002
    half_window: int = 5
    max_edge_per_row: int = 40
    max_planar_per_row: int = 80
    nms_window: int = 5


MODES = ("uniform", "nonuniform")
SEGMENTATIONS = ("fps", "dbscan")
MODELINGS = ("plane_point", "point_only")


@dataclass(frozen=True)
class CodecConfig:
    mode: str = "uniform"
    base_accuracy: float = 0.02
    cluster_count: int = 100
    backend: str = "BWT"
    segmentation: str = "fps"
    dbscan_eps: float = 2.0
    dbscan_min_pts: int = 5
    modeling: str = "plane_point"
    ground_ransac: RansacConfig = field(default_factory=RansacConfig)
    plane_ransac: RansacConfig = field(default_factory=RansacConfig)
    salience: SalienceConfig = field(default_factory=SalienceConfig)
    fps_sample_cap: int = 20000
    min_plane_points: int = 30
    max_incidence_deg: float = 75.0

    def validate(self) -> "CodecConfig":
        from .backends import BackendId

        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.segmentation not in SEGMENTATIONS:
            raise ConfigError(f"segmentation must be one of {SEGMENTATIONS}")
        if self.modeling not in MODELINGS:
            raise ConfigError(f"modeling must be one of {MODELINGS}")
        if not self.base_accuracy > 0:
            raise ConfigError("base_accuracy must be > 0")
        if not 1 <= self.cluster_count <= 0xFFFF:
            raise ConfigError("cluster_count must be in [1, 65535]")
        if not self.dbscan_eps > 0 or self.dbscan_min_pts < 1:
            raise ConfigError("dbscan needs eps > 0 and min_pts >= 1")
        if self.fps_sample_cap < 1:
            raise ConfigError("fps_sample_cap must be >= 1")
        BackendId.parse(self.backend)
        self.ground_ransac.validate()
        self.plane_ransac.validate()
        return self

    def label(self) -> str:
        seg = self.segmentation if self.segmentation == "fps" else f"dbscan-{self.dbscan_eps:g}"
        k = f"-{self.cluster_count}" if self.segmentation == "fps" else ""
        model = "plane" if self.modeling == "plane_point" else "point"
        return f"{seg}{k}-{model}-{self.mode}-{self.backend}-{self.base_accuracy:g}"

    def to_dict(self) -> dict:
        return asdict(self)
