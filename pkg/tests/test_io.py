import numpy as np
import pytest

from rpcc.errors import ParseError
from rpcc.io import (guess_format, parse_kitti_bin, parse_rimg, parse_xyz_text, read_scan, rimg_bytes, write_points,
                     write_rimg)
from rpcc.scenes import make_scene

from conftest import SMALL_GEOM


def fixture_points():
    i = np.arange(100, dtype=np.float64)
    return np.c_[i * 0.25 - 12.5, np.sin(i) * 3, i % 7 - 3.0]


def test_kitti_sizes():
    assert parse_kitti_bin(np.array([1, 2, 3, 9], dtype="<f4").tobytes()).tolist() == [[1, 2, 3]]
    with pytest.raises(ParseError) as err:
        parse_kitti_bin(b"\x00" * 15)
    assert err.value.offset == 0
    with pytest.raises(ParseError) as err:
        parse_kitti_bin(b"\x00" * 40)
    assert err.value.offset == 32


def test_kitti_golden(tmp_path):
    pts = fixture_points()
    path = tmp_path / "f.bin"
    write_points(path, pts)
    assert path.stat().st_size == 1600
    back = read_scan(path)
    np.testing.assert_array_equal(back, pts.astype(np.float32).astype(np.float64))
    assert np.all(np.frombuffer(path.read_bytes(), "<f4")[3::4] == 0)


def test_xyz_golden(tmp_path):
    pts = fixture_points()
    path = tmp_path / "f.xyz"
    write_points(path, pts)
    np.testing.assert_array_equal(read_scan(path), pts)


def test_xyz_errors():
    with pytest.raises(ParseError) as err:
        parse_xyz_text(b"1 2 3\n4 5\n")
    assert err.value.offset == 6
    assert parse_xyz_text(b"# header\n1 2 3 0.5\n\n").tolist() == [[1, 2, 3]]
    with pytest.raises(ParseError):
        parse_xyz_text(b"1 2 nan\n")


def test_rimg_round_trip(tmp_path):
    img = make_scene("room", SMALL_GEOM, seed=2, dropout=0.2)
    path = tmp_path / "s.rimg"
    write_rimg(path, img)
    assert read_scan(path).same_as(img)


def test_rimg_corrupt():
    data = rimg_bytes(make_scene("room", SMALL_GEOM, seed=2))
    for bad in (data[:10], data[:-1], b"XXXX" + data[4:]):
        with pytest.raises(ParseError):
            parse_rimg(bad)


def test_guess_format():
    assert guess_format("a/b.BIN") == "kitti_bin"
    assert guess_format("x.txt") == "xyz_text"
    with pytest.raises(ParseError):
        guess_format("x.pcd")
