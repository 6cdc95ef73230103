import numpy as np
import pytest

from freqsal import io, spectrum
from freqsal.model import Model, ModelConfig
from freqsal.spectral import dft_oracle

from conftest import TOY


def test_constant_image_lights_only_the_centre(tmp_path):
    spectrum.dump(np.full((16, 16), 0.6), tmp_path, "c")
    amp = io.read_pnm(tmp_path / "c_amplitude.pgm")
    assert amp[8, 8] == 255
    amp[8, 8] = 0
    assert not amp.any()


def test_sinusoid_gives_two_symmetric_peaks():
    x = np.cos(2 * np.pi * 3 * np.arange(16) / 16)[None, :].repeat(16, axis=0)
    amp = spectrum.amplitude_image(x)
    peaks = np.argwhere(amp > 0.5)
    assert sorted(map(tuple, peaks)) == [(8, 5), (8, 11)]


def test_dump_values_match_oracle(tmp_path):
    x = np.random.default_rng(0).random((16, 16))
    spectrum.dump(x, tmp_path, "r")
    got = spectrum.read_csv(tmp_path / "r.csv")
    want = dft_oracle(x, (-2, -1)).data[:, :9]
    assert got.shape == (16, 9)
    assert np.abs(got - want).max() <= 1e-12 * np.abs(want).max()


def test_phase_image_range_and_guard():
    ph = spectrum.phase_image(np.full((8, 8), 2.0))
    assert np.all(ph == 0.5)
    ph = spectrum.phase_image(np.random.default_rng(1).random((8, 8)))
    assert ph.min() >= 0 and ph.max() <= 1


def test_dump_rejects_stacks(tmp_path):
    with pytest.raises(ValueError):
        spectrum.dump(np.zeros((2, 4, 4)), tmp_path)


def test_feature_planes():
    model = Model(ModelConfig(**TOY))
    rng = np.random.default_rng(2)
    rgb, th = rng.random((1, 3, 32, 32)), rng.random((1, 1, 32, 32))
    assert spectrum.feature_plane(model, rgb, th, "r1").shape == (8, 8)
    assert spectrum.feature_plane(model, rgb, th, "e3", 1).shape == (32, 32)
    with pytest.raises(spectrum.UnknownFeature, match="valid names"):
        spectrum.feature_plane(model, rgb, th, "x9")
    with pytest.raises(ValueError):
        spectrum.feature_plane(model, rgb, th, "d1", 99)
