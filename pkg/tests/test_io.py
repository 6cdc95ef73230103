import numpy as np
import pytest

from freqsal import io


def test_gray_and_rgb_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    gray = rng.integers(0, 256, (5, 7), dtype=np.uint8)
    rgb = rng.integers(0, 256, (4, 6, 3), dtype=np.uint8)
    io.write_pnm(tmp_path / "g.pgm", gray)
    io.write_pnm(tmp_path / "c.ppm", rgb)
    assert np.array_equal(io.read_pnm(tmp_path / "g.pgm"), gray)
    assert np.array_equal(io.read_pnm(tmp_path / "c.ppm"), rgb)
    x = io.load_rgb(tmp_path / "c.ppm")
    assert x.shape == (3, 4, 6) and np.array_equal(io.to_uint8(x.transpose(1, 2, 0)), rgb)
    assert io.load_rgb(tmp_path / "g.pgm").shape == (3, 5, 7)


def test_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# a comment\n2 1 # trailing\n255\n\x05\xfa")
    assert io.read_pnm(p).tolist() == [[5, 250]]


def test_quantisation():
    assert io.to_uint8([0.0, 1.0, -3.0, 7.0, 0.5 / 255, 0.4 / 255]).tolist() == [0, 255, 0, 255, 1, 0]


def test_float_save_is_lossless_on_the_grid(tmp_path):
    x = np.random.default_rng(1).integers(0, 256, (3, 4)) / 255
    io.save_gray(tmp_path / "x.pgm", x)
    assert np.array_equal(io.load_gray(tmp_path / "x.pgm"), x)


@pytest.mark.parametrize("payload", [b"P2\n1 1\n255\n0", b"P5\n1 1\n65535\n\x00\x00", b"P5\n2 2\n255\n\x00", b"P5\n2"])
def test_bad_images(tmp_path, payload):
    p = tmp_path / "bad.pgm"
    p.write_bytes(payload)
    with pytest.raises(io.FormatError):
        io.read_pnm(p)


def test_write_rejects_bad_arrays(tmp_path):
    with pytest.raises(TypeError):
        io.write_pnm(tmp_path / "x.pgm", np.zeros((2, 2)))
    with pytest.raises(ValueError):
        io.write_pnm(tmp_path / "x.pgm", np.zeros((2, 2, 2), dtype=np.uint8))


def _params():
    rng = np.random.default_rng(2)
    return [("a.w", rng.normal(size=(3, 4))), ("b", np.array(2.5)), ("c.x", rng.normal(size=(2, 1, 5)))]


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    p = tmp_path / "m.fqsl"
    io.save_checkpoint(p, "[model]\nx = 1\n", _params())
    text, params = io.load_checkpoint(p)
    assert text == "[model]\nx = 1\n"
    assert list(params) == ["a.w", "b", "c.x"]
    for name, arr in _params():
        assert params[name].shape == arr.shape and params[name].tobytes() == arr.tobytes()
    assert p.read_bytes()[:4] == io.MAGIC


def test_checkpoint_rejects_damage(tmp_path):
    p = tmp_path / "m.fqsl"
    io.save_checkpoint(p, "cfg", _params())
    raw = p.read_bytes()
    for bad in (raw[:-3], raw + b"\x00", b"XXXX" + raw[4:], raw[:4] + (9).to_bytes(4, "little") + raw[8:]):
        p.write_bytes(bad)
        with pytest.raises(io.FormatError):
            io.load_checkpoint(p)
