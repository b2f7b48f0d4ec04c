"""Little-endian byte packing helpers used by the frame format."""

from __future__ import annotations

import itertools
import math
import struct

import numpy as np

from .errors import CorruptFrameError
from .geometry import round_half_away
from .quantization import decode_varints, encode_varints

INT24_MAX = (1 << 23) - 1
NORMAL_SCALE = INT24_MAX  # normal components in [-1, 1]
OFFSET_SCALE = 25600  # plane offset d in [-327.68, 327.67] m


def f32(x: float) -> float:
    """Round a float to single precision, as it will be after a wire round trip."""
    return float(np.float32(x))


def quantize_plane(plane) -> tuple[int, int, int, int]:
    a, b, c, d = (float(v) for v in plane)
    ints = [int(round_half_away(v * NORMAL_SCALE)) for v in (a, b, c)]
    ints.append(int(round_half_away(d * OFFSET_SCALE)))
    ints[:3] = [max(-INT24_MAX, min(INT24_MAX, v)) for v in ints[:3]]
    ints[3] = max(-INT24_MAX - 1, min(INT24_MAX, ints[3]))
    return tuple(ints)


def dequantize_plane(ints) -> tuple[float, float, float, float]:
    a, b, c = (v / NORMAL_SCALE for v in ints[:3])
    d = ints[3] / OFFSET_SCALE
    norm = math.sqrt(a * a + b * b + c * c)
    if norm == 0:
        raise CorruptFrameError("plane with zero normal")
    return a / norm, b / norm, c / norm, d / norm


def wire_plane(plane) -> tuple[float, float, float, float] | None:
    """The plane exactly as the decoder will see it (None if its normal vanishes)."""
    try:
        return dequantize_plane(quantize_plane(plane))
    except CorruptFrameError:
        return None


_NEIGHBOURS = list(itertools.product((0, -1, 1), repeat=4))


def plane_ints(plane) -> tuple[int, int, int, int]:
    """Fixed-point words that decode to exactly ``plane``, a :func:`wire_plane` result.

    Renormalisation moves each component by less than one step, so the words
    that produced ``plane`` are within one step of re-quantizing it.
    """
    base = quantize_plane(plane)
    target = tuple(float(v) for v in plane)
    for delta in _NEIGHBOURS:
        ints = tuple(b + e for b, e in zip(base, delta))
        try:
            if dequantize_plane(ints) == target:
                return ints
        except CorruptFrameError:
            continue
    raise ValueError("plane is not a decoded wire plane")


class Writer:
    def __init__(self):
        self.buf = bytearray()

    def pack(self, fmt: str, *values):
        self.buf += struct.pack("<" + fmt, *values)

    def int24(self, v: int):
        self.buf += (v & 0xFFFFFF).to_bytes(3, "little")

    def plane(self, plane):
        for v in plane_ints(plane):
            self.int24(v)

    def varints(self, values):
        self.buf += encode_varints(values)

    def getvalue(self) -> bytes:
        return bytes(self.buf)


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def _take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFrameError("info data ends early")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        vals = struct.unpack(fmt, self._take(struct.calcsize(fmt)))
        return vals[0] if len(vals) == 1 else vals

    def int24(self) -> int:
        v = int.from_bytes(self._take(3), "little")
        return v - (1 << 24) if v & 0x800000 else v

    def plane(self):
        return dequantize_plane([self.int24() for _ in range(4)])

    def varints(self, count: int) -> np.ndarray:
        """Read exactly ``count`` LEB128 values."""
        if count == 0:
            return np.zeros(0, dtype=np.uint64)
        b = np.frombuffer(self.data, dtype=np.uint8, offset=self.pos)
        ends = np.flatnonzero((b & 0x80) == 0)
        if len(ends) < count:
            raise CorruptFrameError("info data ends inside a varint list")
        stop = int(ends[count - 1]) + 1
        values = decode_varints(bytes(b[:stop]), count)
        self.pos += stop
        return values

    def varint(self) -> int:
        return int(self.varints(1)[0])

    def done(self) -> bool:
        return self.pos == len(self.data)


def mask_runs(mask: np.ndarray) -> np.ndarray:
    """Alternating run lengths of a flattened bool mask, starting with a False run."""
    flat = np.asarray(mask, dtype=bool).ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds)
    if flat.size and flat[0]:
        runs = np.concatenate([[0], runs])
    return runs


def mask_from_runs(runs, shape) -> np.ndarray:
    runs = np.asarray(runs, dtype=np.int64)
    size = int(np.prod(shape))
    if runs.sum() != size:
        raise CorruptFrameError("validity mask runs do not cover the image")
    values = (np.arange(len(runs)) % 2).astype(bool)
    return np.repeat(values, runs).reshape(shape)
