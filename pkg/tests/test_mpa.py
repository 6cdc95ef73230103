import numpy as np
import pytest

from freqsal import fft, mpa, nn
from freqsal.autodiff import grad_check
from freqsal.spectral import AMP_GUARD
from freqsal.tensor import ShapeError, Tensor

from conftest import jitter

SEEDS = range(20)


def _weights(channels=2, size=4, seed=0, noise=0.0, filters=8):
    rng = np.random.default_rng(seed)
    store = nn.ParamStore()
    w = mpa.MpaWeights.init(store, "m", channels, (size, size), rng, filters)
    if noise:
        jitter(store, rng, noise)
    return store, w


# straight-line numpy references built on the tested transforms


def _conv1(x, c):
    return np.einsum("oc,...chw->...ohw", c.w.data, x) + c.b.data[:, None, None]


def _clc(x, c):
    h = _conv1(x, c.first)
    return _conv1(np.where(h > 0, h, 0.01 * h), c.second)


def _angle(z):
    # same convention as the library: phase 0 below the modulus guard
    return np.where(np.abs(z) < AMP_GUARD, 0.0, np.arctan2(z.imag + 0.0, z.real))


def _enhance(a, b):
    ac = fft.rfft(a, axis=-3)
    amp = _clc(np.abs(ac), b.chan_amp)
    return fft.irfft(amp * np.exp(1j * _clc(_angle(ac), b.chan_pha)), a.shape[-3], axis=-3)


def _branch(x, b):
    u = _conv1(x, b.lift)
    u = b.act.s.data * np.maximum(u, 0) ** 2 + b.act.b.data
    X = fft.rfft2(u)
    a = np.abs(X)
    return a * _enhance(a, b) * np.exp(1j * _clc(_angle(X), b.spatial_pha))


def _filter(r, t, bank):
    c = r.shape[-3]
    v = (r + t).mean(axis=(-2, -1))
    h = bank.mlp.fc1.w.data @ v + bank.mlp.fc1.b.data
    s = bank.mlp.fc2.w.data @ np.where(h > 0, h, 0.01 * h) + bank.mlp.fc2.b.data
    s = s.reshape(c, -1)
    p = np.exp(s - s.max(axis=1, keepdims=True))
    p /= p.sum(axis=1, keepdims=True)
    lf = bank.lf_re.data + 1j * bank.lf_im.data
    return np.einsum("cn,nhw->chw", p, lf)


def _mpf(r, t, w):
    spec = _branch(r, w.rgb) + _branch(t, w.thermal)
    return fft.irfft2(_filter(r, t, w.bank) * spec, r.shape[-1])


# ------------------------------------------------------------------ mixture


def test_mixture_weights_examples():
    p = mpa.mixture_weights(Tensor([0.0, np.log(3.0)]), 1, 2).data
    assert np.abs(p - [[0.25, 0.75]]).max() <= 1e-15
    scores = np.random.default_rng(0).normal(size=3 * 8)
    rows = mpa.mixture_weights(Tensor(scores), 3, 8).data
    assert np.abs(rows.sum(axis=1) - 1).max() <= 1e-12 and rows.min() >= 0
    # score (j, n) sits at j*N + n, and permuting filters permutes weights
    assert np.argmax(rows[1]) == np.argmax(scores[8:16])
    perm = np.random.default_rng(1).permutation(8)
    permuted = mpa.mixture_weights(Tensor(scores.reshape(3, 8)[:, perm].ravel()), 3, 8).data
    assert np.abs(permuted - rows[:, perm]).max() <= 1e-15


def test_uniform_scores_average_the_filters():
    store, w = _weights(channels=3, size=4, seed=2)
    bank = w.bank
    for name in ("m.df.mlp.fc2.w", "m.df.mlp.fc2.b"):
        store.set(name, np.zeros(store[name].shape))
    x = Tensor(np.random.default_rng(3).normal(size=(3, 4, 4)))
    filt = mpa.dynamic_filter(x, x, bank).data
    mean = (bank.lf_re.data + 1j * bank.lf_im.data).mean(axis=0)
    assert np.abs(filt - mean).max() <= 1e-12


def test_saturated_score_selects_one_filter():
    store, w = _weights(channels=1, size=4, seed=4, filters=3)
    lf = w.bank.lf_re.data + 1j * w.bank.lf_im.data
    store.set("m.df.mlp.fc2.w", np.zeros((3, store["m.df.mlp.fc2.w"].shape[1])))
    errs = []
    for gap in (2.0, 10.0, 50.0):
        store.set("m.df.mlp.fc2.b", [0.0, gap, 0.0])
        x = Tensor(np.ones((1, 4, 4)))
        errs.append(np.abs(mpa.dynamic_filter(x, x, w.bank).data[0] - lf[1]).max())
    assert errs[0] > errs[1] > errs[2] and errs[2] <= 1e-15 * np.abs(lf).max() + 1e-20


# ------------------------------------------------------------------ channel enhancement


def test_channel_enhance_identity_round_trip(store):
    cb = 3
    eye = nn.Clc.init_identity(store, "a", cb)
    pha = nn.Clc.init_identity(store, "p", cb)
    a = Tensor(np.abs(np.random.default_rng(5).normal(size=(4, 4, 3))))
    assert np.abs(mpa.channel_enhance(a, eye, pha).data - a.data).max() <= 1e-12
    with pytest.raises(ValueError):
        mpa.channel_enhance(Tensor(-a.data), eye, pha)


def test_channel_constant_input_stays_constant(store, rng):
    # an amplitude stack that keeps the DC bin and clears the rest
    c, cb = 4, 3
    keep = np.zeros((cb, cb))
    keep[0, 0] = 1.0
    amp = nn.Clc(nn.Conv1(Tensor(keep), Tensor(np.zeros(cb))), nn.Conv1(Tensor(np.eye(cb)), Tensor(np.zeros(cb))))
    pha = nn.Clc.init_identity(store, "p", cb)
    plane = np.abs(rng.normal(size=(1, 3, 3)))
    out = mpa.channel_enhance(Tensor(np.repeat(plane, c, axis=0)), amp, pha).data
    assert np.abs(out - out[:1]).max() <= 1e-12
    assert np.abs(out[0] - plane[0]).max() <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_channel_enhance_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    store = nn.ParamStore()
    amp = nn.Clc.init(store, "a", 3, 3, rng)
    pha = nn.Clc.init(store, "p", 3, 3, rng)
    a = np.abs(rng.normal(size=(4, 4, 3)))
    ac = fft.rfft(a, axis=0)
    ref = fft.irfft(_clc(np.abs(ac), amp) * np.exp(1j * _clc(_angle(ac), pha)), 4, axis=0)
    assert np.abs(mpa.channel_enhance(Tensor(a), amp, pha).data - ref).max() <= 1e-12


# ------------------------------------------------------------------ MPF / MPA


def test_tied_branches_double_the_fused_spectrum():
    store, w = _weights(channels=3, size=4, seed=6, noise=0.2)
    tied = mpa.MpaWeights(w.rgb, w.rgb, w.bank, w.norm, w.ffn)
    x = Tensor(np.random.default_rng(7).normal(size=(3, 4, 4)))
    single = mpa.branch_spectrum(x, w.rgb).data
    assert np.array_equal(mpa.fused_spectrum(x, x, tied).data, 2 * single)


def test_zero_inputs_give_zero_output():
    store, w = _weights(channels=2, size=4, seed=8)
    for name in store:
        if name.endswith(".b"):
            store.set(name, np.zeros(store[name].shape))
    zero = Tensor(np.zeros((2, 4, 4)))
    assert np.all(mpa.mpf(zero, zero, w).data == 0)


@pytest.mark.parametrize("seed", range(5))
def test_mpf_matches_oracle(seed):
    store, w = _weights(channels=2, size=4, seed=seed, noise=0.3)
    rng = np.random.default_rng(100 + seed)
    r, t = rng.normal(size=(2, 4, 4)), rng.normal(size=(2, 4, 4))
    got = mpa.mpf(Tensor(r), Tensor(t), w).data
    assert got.dtype == np.float64
    ref = _mpf(r, t, w)
    assert np.abs(got - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


def test_mpf_output_is_real_and_hermitian_consistent():
    store, w = _weights(channels=4, size=8, seed=9)
    rng = np.random.default_rng(10)
    r, t = Tensor(rng.normal(size=(4, 8, 8))), Tensor(rng.normal(size=(4, 8, 8)))
    out = mpa.mpf(r, t, w).data
    spec = (mpa.dynamic_filter(r, t, w.bank) * mpa.fused_spectrum(r, t, w)).data
    # the same half spectrum through numpy's inverse, which also keeps the output real
    assert np.isrealobj(out)
    assert np.abs(out - np.fft.irfft2(spec, s=(8, 8))).max() <= 1e-10


@pytest.mark.parametrize("c,s", [(16, 16), (32, 8), (64, 4), (128, 2)])
def test_mpa_shape_at_stage_sizes(c, s):
    _, w = _weights(channels=c, size=s, seed=c)
    x = Tensor(np.random.default_rng(c).normal(size=(c, s, s)))
    assert mpa.mpa(x, x, w).shape == (c, s, s)


def test_mpa_residual_path():
    store, w = _weights(channels=3, size=4, seed=11, noise=0.2)
    for name in ("m.df.lf_re", "m.df.lf_im", "m.ffn.pw.w", "m.ffn.pw.b"):
        store.set(name, np.zeros(store[name].shape))
    rng = np.random.default_rng(12)
    r, t = rng.normal(size=(3, 4, 4)), rng.normal(size=(3, 4, 4))
    assert np.array_equal(mpa.mpa(Tensor(r), Tensor(t), w).data, r + t)


def test_mpa_modality_symmetry():
    store, w = _weights(channels=3, size=8, seed=13, noise=0.3)
    swapped = mpa.MpaWeights(w.thermal, w.rgb, w.bank, w.norm, w.ffn)
    rng = np.random.default_rng(14)
    r, t = Tensor(rng.normal(size=(3, 8, 8))), Tensor(rng.normal(size=(3, 8, 8)))
    assert np.abs(mpa.mpa(r, t, w).data - mpa.mpa(t, r, swapped).data).max() <= 1e-12


def test_mismatched_modalities():
    _, w = _weights(channels=2, size=4)
    with pytest.raises(ShapeError):
        mpa.mpa(Tensor(np.zeros((2, 4, 4))), Tensor(np.zeros((2, 2, 2))), w)


@pytest.mark.parametrize("seed", SEEDS)
def test_mpf_and_mpa_gradients(seed):
    store, w = _weights(channels=2, size=8, seed=seed, noise=0.2, filters=4)
    rng = np.random.default_rng(seed + 50)
    x = {"r": rng.normal(size=(2, 8, 8)), "t": rng.normal(size=(2, 8, 8))}
    assert grad_check(lambda v: mpa.mpf(v["r"], v["t"], w), x, seed) <= 1e-4
    assert grad_check(lambda v: mpa.mpa(v["r"], v["t"], w), x, seed) <= 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_mpf_gradient_on_four_channels(seed):
    _, w = _weights(channels=4, size=8, seed=seed, noise=0.2)
    rng = np.random.default_rng(seed + 70)
    x = {"r": rng.normal(size=(4, 8, 8)), "t": rng.normal(size=(4, 8, 8))}
    assert grad_check(lambda v: mpa.mpf(v["r"], v["t"], w), x, seed) <= 1e-4
