"""Exception hierarchy shared by the codec, IO layer and CLI."""


class RpccError(Exception):
    """Base class for all codec errors."""


class DegenerateInputError(RpccError, ValueError):
    """A point sits at the sensor origin, so it has no direction."""


class OutOfFovError(RpccError, ValueError):
    """A point lies outside the vertical field of view."""


class ShapeError(RpccError, ValueError):
    """Geometry or validity masks of two images do not match."""


class SizeError(RpccError, ValueError):
    """An input collection has the wrong number of elements."""


class ConfigError(RpccError, ValueError):
    pass


class ParseError(RpccError, ValueError):
    """A scan file could not be parsed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DecodeError(RpccError, ValueError):
    """An entropy-coded payload is corrupt or truncated."""


class CorruptFrameError(RpccError, ValueError):
    """A compressed frame failed magic, version, length or checksum validation."""
