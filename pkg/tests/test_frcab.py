import numpy as np
import pytest

from freqsal import frcab, nn
from freqsal.autodiff import grad_check
from freqsal.tensor import Tensor

from conftest import jitter

SEEDS = range(20)


def _weights(channels=4, out=3, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    store = nn.ParamStore()
    w = frcab.FrcabWeights.init(store, "r", channels, out, rng)
    if noise:
        jitter(store, rng, noise)
    return store, w


def test_zero_body_is_pure_residual(rng):
    store, w = _weights(noise=0.3)
    for name in ("r.body.1.w", "r.body.1.b"):
        store.set(name, np.zeros(store[name].shape))
    x = rng.normal(size=(4, 5, 5))
    assert np.array_equal(frcab.pre_projection(Tensor(x), w).data, x)


def test_unit_gates_return_the_pooled_descriptor(rng):
    # at init both gates output 1, so the channel spectrum passes unchanged
    _, w = _weights(channels=5)
    body = Tensor(rng.normal(size=(5, 4, 4)))
    att = frcab.attention(body, w).data
    assert att.shape == (5, 1, 1) and np.isrealobj(att)
    assert np.abs(att - nn.gap(body).data).max() <= 1e-12


def test_attention_is_uniform_over_space(rng):
    _, w = _weights(noise=0.3)
    x = Tensor(rng.normal(size=(4, 6, 6)))
    body = nn.clc(x, w.body).data
    ratio = (frcab.pre_projection(x, w).data - x.data) / body
    assert np.abs(ratio - ratio[:, :1, :1]).max() <= 1e-9


def test_output_shape_and_channels(rng):
    _, w = _weights(channels=4, out=7)
    assert w.out_channels == 7
    assert frcab.frcab(Tensor(rng.normal(size=(4, 3, 5))), w).shape == (7, 6, 10)
    assert frcab.frcab(Tensor(rng.normal(size=(2, 4, 3, 3))), w).shape == (2, 7, 6, 6)


@pytest.mark.parametrize("seed", SEEDS)
def test_frcab_gradient(seed):
    _, w = _weights(channels=4, out=3, seed=seed, noise=0.2)
    x = {"x": np.random.default_rng(seed + 40).normal(size=(4, 8, 8))}
    assert grad_check(lambda v: frcab.frcab(v["x"], w), x, seed) <= 1e-4
    assert grad_check(lambda v: frcab.attention(v["x"], w), x, seed) <= 1e-4
