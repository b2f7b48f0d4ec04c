"""Range-image LiDAR point cloud compression with region-wise intra-prediction."""

from .codec import CompressedFrame, compress, decompress, decompress_detailed, read_frames
from .config import CodecConfig, RansacConfig, SalienceConfig, sensor_geometry
from .geometry import SensorGeometry, cloud_to_range_image
from .range_image import RangeImage

__all__ = [
    "CodecConfig", "CompressedFrame", "RangeImage", "RansacConfig", "SalienceConfig", "SensorGeometry",
    "cloud_to_range_image", "compress", "decompress", "decompress_detailed", "read_frames",
    "sensor_geometry",
]
__version__ = "0.1.0"
