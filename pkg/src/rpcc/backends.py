"""General-purpose lossless byte compressors behind one interface."""

from __future__ import annotations

import bz2
import enum
import zlib

import lz4.frame

from . import arithmetic
from .errors import ConfigError, DecodeError


class BackendId(enum.IntEnum):
    """Backend identifiers; the value is the byte written to the frame header."""

    LZ_FAST = 0
    DEFLATE = 1
    BWT = 2
    ARITHMETIC = 3

    @classmethod
    def parse(cls, value) -> "BackendId":
        if isinstance(value, BackendId):
            return value
        if isinstance(value, int):
            try:
                return cls(value)
            except ValueError:
                raise ConfigError(f"unknown backend id {value}") from None
        key = str(value).strip().upper().replace("-", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ConfigError(
                f"unknown backend {value!r}; choose from {', '.join(b.name for b in cls)}"
            ) from None


_ALIASES = {"LZ4": "LZ_FAST", "LZ": "LZ_FAST", "ZLIB": "DEFLATE", "BZIP2": "BWT", "BZ2": "BWT",
            "AC": "ARITHMETIC"}


def _lz4_compress(data):
    return lz4.frame.compress(data, content_checksum=True, store_size=True)


def _lz4_decompress(payload):
    dctx = lz4.frame.LZ4FrameDecompressor()
    out = dctx.decompress(payload)
    if not dctx.eof or dctx.unused_data:
        raise DecodeError("LZ4 payload truncated or followed by garbage")
    return out


def _deflate_decompress(payload):
    d = zlib.decompressobj()
    out = d.decompress(payload)
    if not d.eof or d.unused_data:
        raise DecodeError("deflate payload truncated or followed by garbage")
    return out


def _bz2_decompress(payload):
    if not payload:
        raise DecodeError("empty bzip2 payload")
    d = bz2.BZ2Decompressor()
    out = d.decompress(payload)
    if not d.eof or d.unused_data:
        raise DecodeError("bzip2 payload truncated or followed by garbage")
    return out


_CODECS = {
    BackendId.LZ_FAST: (_lz4_compress, _lz4_decompress),
    BackendId.DEFLATE: (lambda data: zlib.compress(data, 6), _deflate_decompress),
    BackendId.BWT: (lambda data: bz2.compress(data, 9), _bz2_decompress),
    BackendId.ARITHMETIC: (arithmetic.encode, arithmetic.decode),
}


def compress_bytes(backend, data: bytes) -> bytes:
    compress, _ = _CODECS[BackendId.parse(backend)]
    return compress(bytes(data))


def decompress_bytes(backend, payload: bytes) -> bytes:
    """Inverse of :func:`compress_bytes`; raises DecodeError on corrupt input."""
    _, decompress = _CODECS[BackendId.parse(backend)]
    try:
        return decompress(bytes(payload))
    except DecodeError:
        raise
    except (OSError, ValueError, EOFError, RuntimeError, zlib.error) as exc:
        raise DecodeError(f"{BackendId.parse(backend).name} payload is corrupt: {exc}") from exc
