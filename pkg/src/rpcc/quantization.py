"""Residual quantization with per-cluster step sizes, plus integer serialisation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DecodeError
from .geometry import round_half_away
from .range_image import ResidualPlane


@dataclass(frozen=True, eq=False)
class QuantizedResiduals:
    codes: np.ndarray  # int64, one per valid pixel in row-major order
    accuracies: np.ndarray  # step size per cluster label


def pixel_accuracy(labels: np.ndarray, accuracies) -> np.ndarray:
    """Step size for each valid pixel (row-major), looked up by its label."""
    acc = np.asarray(accuracies, dtype=np.float64)
    if np.any(~(acc > 0)):
        raise ValueError("quantization accuracies must be positive")
    return acc[labels[labels >= 0]]


def quantize(residual: ResidualPlane, accuracies, labels: np.ndarray) -> QuantizedResiduals:
    step = pixel_accuracy(labels, accuracies)
    res = residual.values[residual.valid]
    codes = round_half_away(res / step).astype(np.int64)
    return QuantizedResiduals(codes, np.asarray(accuracies, dtype=np.float64))


def dequantize(q: QuantizedResiduals, labels: np.ndarray) -> ResidualPlane:
    valid = labels >= 0
    values = np.zeros(labels.shape)
    values[valid] = q.codes * pixel_accuracy(labels, q.accuracies)
    return ResidualPlane(values, valid)


def zigzag(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64)
    return ((v << 1) ^ (v >> 63)).astype(np.uint64)


def unzigzag(values) -> np.ndarray:
    u = np.asarray(values, dtype=np.uint64)
    return ((u >> np.uint64(1)).astype(np.int64)) ^ -((u & np.uint64(1)).astype(np.int64))


def encode_varints(values) -> bytes:
    """LEB128 encoding of unsigned integers."""
    u = np.asarray(values, dtype=np.uint64).ravel()
    if len(u) == 0:
        return b""
    nbytes = np.ones(len(u), dtype=np.int64)
    rest = u >> np.uint64(7)
    while rest.any():
        nbytes += rest > 0
        rest >>= np.uint64(7)
    ends = np.cumsum(nbytes)
    starts = ends - nbytes
    owner = np.repeat(np.arange(len(u)), nbytes)
    pos = np.arange(ends[-1]) - starts[owner]
    groups = (u[owner] >> (np.uint64(7) * pos.astype(np.uint64))) & np.uint64(0x7F)
    cont = pos < nbytes[owner] - 1
    return (groups | (cont.astype(np.uint64) << np.uint64(7))).astype(np.uint8).tobytes()


def decode_varints(data: bytes, count: int | None = None) -> np.ndarray:
    b = np.frombuffer(data, dtype=np.uint8)
    if len(b) == 0:
        if count:
            raise DecodeError(f"expected {count} varints, got none")
        return np.zeros(0, dtype=np.uint64)
    if b[-1] & 0x80:
        raise DecodeError("truncated varint stream")
    end = (b & 0x80) == 0
    owner = np.concatenate([[0], np.cumsum(end)[:-1]])
    ends = np.flatnonzero(end)
    starts = np.concatenate([[0], ends[:-1] + 1])
    pos = np.arange(len(b)) - starts[owner]
    if pos.max() > 9:
        raise DecodeError("varint longer than 64 bits")
    parts = (b & 0x7F).astype(np.uint64) << (np.uint64(7) * pos.astype(np.uint64))
    values = np.add.reduceat(parts, starts)
    if count is not None and len(values) != count:
        raise DecodeError(f"expected {count} varints, got {len(values)}")
    return values


def encode_codes(codes) -> bytes:
    return encode_varints(zigzag(codes))


def decode_codes(data: bytes, count: int | None = None) -> np.ndarray:
    return unzigzag(decode_varints(data, count))
