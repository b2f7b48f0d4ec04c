"""Adaptive order-0 arithmetic coding of byte streams.

A 32-bit range coder with carry propagation (the LZMA "cache + low" scheme)
driven by an adaptive byte-frequency model.  Encoder and decoder update the
model identically after every symbol.

Payload layout: LEB128 length of the original data, then the coded bytes.
"""

from __future__ import annotations

from .errors import DecodeError

TOP = 1 << 24
MASK32 = 0xFFFFFFFF
INCREMENT = 32
MAX_TOTAL = 1 << 16
NSYM = 256


class AdaptiveByteModel:
    """Symbol frequencies kept in a Fenwick tree for O(log n) cumulative lookups."""

    def __init__(self):
        self.freq = [1] * NSYM
        self.total = NSYM
        self._build()

    def _build(self):
        tree = [0] * (NSYM + 1)
        for i, f in enumerate(self.freq, start=1):
            tree[i] += f
            j = i + (i & -i)
            if j <= NSYM:
                tree[j] += tree[i]
        self.tree = tree

    def cumulative(self, sym: int) -> int:
        """Total frequency of symbols below ``sym``."""
        tree, s, i = self.tree, 0, sym
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def find(self, target: int) -> tuple[int, int]:
        """Symbol whose cumulative interval contains ``target``, and its low end."""
        tree, pos, acc, step = self.tree, 0, 0, 1 << 8
        while step:
            nxt = pos + step
            if nxt <= NSYM and acc + tree[nxt] <= target:
                pos = nxt
                acc += tree[nxt]
            step >>= 1
        return pos, acc

    def update(self, sym: int):
        self.freq[sym] += INCREMENT
        self.total += INCREMENT
        if self.total > MAX_TOTAL:
            self.freq = [(f + 1) >> 1 for f in self.freq]
            self.total = sum(self.freq)
            self._build()
            return
        tree, i = self.tree, sym + 1
        while i <= NSYM:
            tree[i] += INCREMENT
            i += i & -i


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()

    def encode(self, cum: int, freq: int, total: int):
        r = self.range // total
        self.low += r * cum
        self.range = r * freq
        while self.range < TOP:
            self.range <<= 8
            self._shift_low()

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low > MASK32:
            carry = low >> 32
            temp = self.cache
            out = self.out
            while True:
                out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self.cache_size -= 1
                if not self.cache_size:
                    break
            self.cache = (low >> 24) & 0xFF
        self.cache_size += 1
        self.low = (low & 0x00FFFFFF) << 8

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self.out)


class RangeDecoder:
    def __init__(self, data: bytes, pos: int = 0):
        if len(data) - pos < 5:
            raise DecodeError("arithmetic payload too short")
        if data[pos] != 0:
            raise DecodeError("arithmetic payload does not start with a zero byte")
        self.data = data
        self.pos = pos + 5
        self.code = int.from_bytes(data[pos + 1:pos + 5], "big")
        self.range = MASK32

    def decode(self, model: AdaptiveByteModel) -> int:
        total = model.total
        r = self.range // total
        v = self.code // r
        if v >= total:
            raise DecodeError("arithmetic code value out of range")
        sym, cum = model.find(v)
        self.code -= r * cum
        self.range = r * model.freq[sym]
        while self.range < TOP:
            if self.pos >= len(self.data):
                raise DecodeError("arithmetic payload truncated")
            self.code = (self.code << 8) | self.data[self.pos]
            self.pos += 1
            self.range <<= 8
        return sym


def _put_length(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        out.append(b | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _get_length(data: bytes) -> tuple[int, int]:
    n = shift = 0
    for i, b in enumerate(data[:10]):
        n |= (b & 0x7F) << shift
        shift += 7
        if not b & 0x80:
            return n, i + 1
    raise DecodeError("bad length prefix in arithmetic payload")


def encode(data: bytes) -> bytes:
    data = bytes(data)
    head = _put_length(len(data))
    if not data:
        return head
    model = AdaptiveByteModel()
    enc = RangeEncoder()
    for sym in data:
        enc.encode(model.cumulative(sym), model.freq[sym], model.total)
        model.update(sym)
    return head + enc.finish()


def decode(payload: bytes) -> bytes:
    payload = bytes(payload)
    n, pos = _get_length(payload)
    if n == 0:
        if pos != len(payload):
            raise DecodeError("trailing bytes after empty arithmetic payload")
        return b""
    model = AdaptiveByteModel()
    dec = RangeDecoder(payload, pos)
    out = bytearray()
    for _ in range(n):
        sym = dec.decode(model)
        out.append(sym)
        model.update(sym)
    if dec.pos != len(payload):
        raise DecodeError("trailing bytes after arithmetic payload")
    return bytes(out)
