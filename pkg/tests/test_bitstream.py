import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpcc.bitstream import (Reader, Writer, dequantize_plane, mask_from_runs, mask_runs, plane_ints,
                            wire_plane)
from rpcc.errors import CorruptFrameError

unit = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: tuple(np.asarray(v) / np.linalg.norm(v)))


@settings(max_examples=500, deadline=None)
@given(n=unit, d=st.floats(-327, 327))
def test_wire_plane_is_a_fixed_point(n, d):
    p = wire_plane((*n, d))
    assert p is not None
    assert dequantize_plane(plane_ints(p)) == p
    assert abs(np.linalg.norm(p[:3]) - 1) <= 1e-9
    assert np.allclose(p[:3], n, atol=1e-6) and abs(p[3] - d) <= 1e-4


def test_int24_and_plane_bytes():
    w = Writer()
    w.int24(-1)
    w.int24((1 << 23) - 1)
    w.plane((0.0, 0.0, 1.0, 1.73))
    data = w.getvalue()
    assert data[:6] == b"\xff\xff\xff\xff\xff\x7f"
    r = Reader(data)
    assert (r.int24(), r.int24()) == (-1, (1 << 23) - 1)
    assert r.plane() == pytest.approx((0, 0, 1, 1.73))
    assert r.done()


def test_reader_truncation():
    with pytest.raises(CorruptFrameError):
        Reader(b"\x01\x02").unpack("I")
    with pytest.raises(CorruptFrameError):
        Reader(b"\x80").varint()


@settings(max_examples=200, deadline=None)
@given(bits=st.lists(st.booleans(), max_size=300), h=st.integers(1, 5))
def test_mask_runs_round_trip(bits, h):
    mask = np.resize(np.array(bits, dtype=bool), (h, max(1, len(bits))))
    runs = mask_runs(mask)
    assert runs.sum() == mask.size
    assert np.array_equal(mask_from_runs(runs, mask.shape), mask)


def test_mask_runs_start_with_invalid():
    assert mask_runs(np.array([[True, True, False]])).tolist() == [0, 2, 1]
