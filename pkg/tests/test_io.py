import numpy as np
import pytest

from houghsplat.errors import FormatError
from houghsplat.io import read_pgm16, read_plane, read_png, write_pgm16, write_plane, write_png


def test_plane_roundtrip(tmp_path, rng):
    data = rng.random((5, 7, 3)).astype(np.float32)
    write_plane(tmp_path / "a.vspl", data)
    np.testing.assert_array_equal(read_plane(tmp_path / "a.vspl"), data)


def test_plane_2d_gets_one_channel(tmp_path):
    write_plane(tmp_path / "a.vspl", np.ones((2, 3)))
    assert read_plane(tmp_path / "a.vspl").shape == (2, 3, 1)


def test_plane_errors(tmp_path):
    p = tmp_path / "bad.vspl"
    p.write_bytes(b"VSP")
    with pytest.raises(FormatError):
        read_plane(p)
    write_plane(p, np.ones((2, 2)))
    p.write_bytes(b"XXXX" + p.read_bytes()[4:])
    with pytest.raises(FormatError) as exc:
        read_plane(p)
    assert exc.value.offset == 0
    write_plane(p, np.ones((2, 2)))
    p.write_bytes(p.read_bytes()[:-1])
    with pytest.raises(FormatError):
        read_plane(p)


def test_pgm_roundtrip_and_byte_order(tmp_path):
    labels = np.array([[0, 1, 2], [300, 65535, 7]])
    write_pgm16(tmp_path / "m.pgm", labels)
    np.testing.assert_array_equal(read_pgm16(tmp_path / "m.pgm"), labels)
    raw = (tmp_path / "m.pgm").read_bytes()
    assert raw.startswith(b"P5\n3 2\n65535\n")
    assert raw[-4:-2] == b"\xff\xff"


def test_pgm_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1\n65535\n\x00\x05\x01\x00")
    np.testing.assert_array_equal(read_pgm16(p), [[5, 256]])


@pytest.mark.parametrize(
    "raw",
    [b"P2\n1 1\n65535\n\x00\x00", b"P5\n1 1\n255\n\x00", b"P5\n2 2\n65535\n\x00\x00", b"P5\n1"],
)
def test_pgm_errors(tmp_path, raw):
    p = tmp_path / "e.pgm"
    p.write_bytes(raw)
    with pytest.raises(FormatError):
        read_pgm16(p)


def test_pgm_rejects_out_of_range(tmp_path):
    with pytest.raises(ValueError):
        write_pgm16(tmp_path / "x.pgm", np.array([[70000]]))


def test_png_roundtrip(tmp_path, rng):
    img = np.round(rng.random((4, 6, 3)) * 255) / 255
    write_png(tmp_path / "i.png", img)
    np.testing.assert_allclose(read_png(tmp_path / "i.png"), img)
