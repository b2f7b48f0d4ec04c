import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rpcc.errors import DecodeError
from rpcc.quantization import (QuantizedResiduals, decode_codes, decode_varints, dequantize, encode_codes,
                               encode_varints, quantize, unzigzag, zigzag)
from rpcc.range_image import ResidualPlane


def one(res, acc):
    plane = ResidualPlane(np.array([[res]]), np.array([[True]]))
    q = quantize(plane, [acc], np.zeros((1, 1), dtype=int))
    return int(q.codes[0]), dequantize(q, np.zeros((1, 1), dtype=int)).values[0, 0]


@pytest.mark.parametrize("res, acc, code, value", [
    (0.049, 0.02, 2, 0.04), (0.0, 0.02, 0, 0.0), (-0.031, 0.02, -2, -0.04),
    (0.01, 0.02, 1, 0.02), (-0.01, 0.02, -1, -0.02),
])
def test_examples(res, acc, code, value):
    q, v = one(res, acc)
    assert q == code and v == pytest.approx(value)
    assert abs(v - res) <= acc / 2 + 1e-12


def test_dequantize_codes():
    labels = np.array([[0, 1, -1]])
    out = dequantize(QuantizedResiduals(np.array([0, 3]), np.array([0.02, 0.06])), labels)
    np.testing.assert_allclose(out.values[0, :2], [0, 0.18])


@settings(max_examples=300, deadline=None)
@given(res=arrays(np.float64, 50, elements=st.floats(-50, 50)),
       accs=st.lists(st.floats(0.001, 0.2), min_size=4, max_size=4), seed=st.integers(0, 1000))
def test_half_accuracy_bound(res, accs, seed):
    labels = np.random.default_rng(seed).integers(-1, 4, size=(5, 10))
    plane = ResidualPlane(res.reshape(5, 10), labels >= 0)
    back = dequantize(quantize(plane, accs, labels), labels)
    acc = np.asarray(accs)[labels[labels >= 0]]
    err = np.abs(back.values[labels >= 0] - plane.values[labels >= 0])
    assert np.all(err <= acc / 2 + 1e-12)


def test_coarser_step_never_grows_code_magnitudes():
    res = np.random.default_rng(0).normal(scale=0.3, size=(1, 5000))
    labels = np.zeros_like(res, dtype=int)
    plane = ResidualPlane(res, labels >= 0)
    sizes = [len(encode_codes(quantize(plane, [a], labels).codes)) for a in (0.02, 0.04, 0.06, 0.08)]
    assert sizes == sorted(sizes, reverse=True)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-(2**62), 2**62)))
def test_code_round_trip(values):
    assert decode_codes(encode_codes(values), len(values)).tolist() == values


def test_zigzag_order():
    assert zigzag([0, -1, 1, -2, 2]).tolist() == [0, 1, 2, 3, 4]
    assert unzigzag(zigzag([-(2**63), 2**63 - 1])).tolist() == [-(2**63), 2**63 - 1]


def test_varint_bytes():
    assert encode_varints([0, 127, 128, 300]) == bytes([0, 127, 0x80, 1, 0xAC, 2])
    with pytest.raises(DecodeError):
        decode_varints(bytes([0x80]))
    with pytest.raises(DecodeError):
        decode_varints(bytes([1, 2]), count=3)
