"""Bimodal spectral fusion: the perception filter and its attention wrapper.

Each modality is lifted by Conv1 + StarReLU, moved to the spatial
half-spectrum, and its amplitude is refined in the channel-Fourier domain.
The two refined spectra are summed, shaped by a per-channel mixture of
learnable spectral filters, and returned to space.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .autodiff import record
from .spectral import amp_phase, irfft2_spatial, irfft_channel, polar, rfft2_spatial, rfft_channel
from .tensor import ShapeError, Tensor, make_complex, softmax

NUM_FILTERS = 8
FILTER_NOISE = 0.02


@dataclass
class DynamicFilterBank:
    lf_re: Tensor  # N x H x (W//2+1)
    lf_im: Tensor
    mlp: nn.Mlp

    @classmethod
    def init(cls, store, name, channels, size, rng, filters=NUM_FILTERS):
        h, w = size
        shape = (filters, h, w // 2 + 1)
        return cls(store.add(f"{name}.lf_re", 1.0 + FILTER_NOISE * rng.normal(size=shape)),
                   store.add(f"{name}.lf_im", FILTER_NOISE * rng.normal(size=shape)),
                   nn.Mlp.init(store, f"{name}.mlp", channels, filters * channels, rng))

    @property
    def filters(self):
        return self.lf_re.shape[0]


@dataclass
class Branch:
    norm: nn.Norm
    lift: nn.Conv1
    act: nn.StarRelu
    chan_amp: nn.Clc
    chan_pha: nn.Clc
    spatial_pha: nn.Clc

    @classmethod
    def init(cls, store, name, channels, rng):
        cb = channels // 2 + 1
        # the gate starts at a-tilde == 1: only the channel DC bin, amplitude C
        gate = np.zeros(cb)
        gate[0] = channels
        return cls(nn.Norm.init(store, f"{name}.norm", channels),
                   nn.Conv1.init(store, f"{name}.lift", channels, channels, rng),
                   nn.StarRelu.init(store, f"{name}.act"),
                   nn.Clc.init_constant(store, f"{name}.chan_amp", cb, cb, rng, gate),
                   nn.Clc.init_identity(store, f"{name}.chan_pha", cb),
                   nn.Clc.init_identity(store, f"{name}.spatial_pha", channels))


@dataclass
class MpaWeights:
    rgb: Branch
    thermal: Branch
    bank: DynamicFilterBank
    norm: nn.Norm
    ffn: nn.DConv3

    @classmethod
    def init(cls, store, name, channels, size, rng, filters=NUM_FILTERS):
        return cls(Branch.init(store, f"{name}.rgb", channels, rng),
                   Branch.init(store, f"{name}.thermal", channels, rng),
                   DynamicFilterBank.init(store, f"{name}.df", channels, size, rng, filters),
                   nn.Norm.init(store, f"{name}.norm", channels),
                   nn.DConv3.init(store, f"{name}.ffn", channels, channels, rng))


def mix_filters(weights, lf):
    """Per-channel convex combination of filters: (..., C, N) x (N, H, W')."""
    n, h, w = lf.shape
    lead = weights.shape[:-1]
    lf_flat = lf.data.reshape(n, h * w)
    out = Tensor.wrap((weights.data @ lf_flat).reshape(lead + (h, w)))

    def vjp(g):
        gf = g.reshape(lead + (h * w,))
        gw = gf @ lf_flat.T
        wf = weights.data.reshape(-1, n)
        glf = (wf.T @ gf.reshape(-1, h * w)).reshape(lf.shape)
        return gw, glf

    return record("mix_filters", out, (weights, lf), vjp)


def mixture_weights(scores, channels, filters):
    """Softmax over the filter index; score (j, n) sits at j*N + n."""
    lead = scores.shape[:-1]
    return softmax(scores.reshape(lead + (channels, filters)), axis=-1)


def filter_from_context(context, bank):
    """Dynamic spectral filter whose mixture is predicted from ``context``."""
    c = context.shape[-3]
    v = nn.gap(context)
    v = v.reshape(v.shape[:-2])
    weights = mixture_weights(nn.mlp(v, bank.mlp), c, bank.filters)
    return make_complex(mix_filters(weights, bank.lf_re), mix_filters(weights, bank.lf_im))


def dynamic_filter(r_norm, t_norm, bank):
    if r_norm.shape != t_norm.shape:
        raise ShapeError(f"modalities differ: {r_norm.shape} vs {t_norm.shape}")
    return filter_from_context(r_norm + t_norm, bank)


def channel_enhance(a_spatial, amp_weights, pha_weights):
    """Refine a spatial amplitude spectrum through its channel-Fourier view."""
    if np.any(a_spatial.data < 0):
        raise ValueError("channel_enhance expects a nonnegative amplitude")
    c = a_spatial.shape[-3]
    a_c, p_c = amp_phase(rfft_channel(a_spatial))
    return irfft_channel(polar(nn.clc(a_c, amp_weights), nn.clc(p_c, pha_weights)), c)


def branch_spectrum(x, b):
    """Lifted half-spectrum of one modality with amplitude gating and
    phase refinement applied."""
    spec = rfft2_spatial(nn.star_relu(nn.conv1x1(x, b.lift), b.act))
    a, p = amp_phase(spec)
    refined = channel_enhance(a, b.chan_amp, b.chan_pha)
    return polar(a * refined, nn.clc(p, b.spatial_pha))


def fused_spectrum(r_norm, t_norm, w):
    return branch_spectrum(r_norm, w.rgb) + branch_spectrum(t_norm, w.thermal)


def mpf(r_norm, t_norm, w):
    if r_norm.shape != t_norm.shape:
        raise ShapeError(f"modalities differ: {r_norm.shape} vs {t_norm.shape}")
    spec = fused_spectrum(r_norm, t_norm, w)
    filt = dynamic_filter(r_norm, t_norm, w.bank)
    return irfft2_spatial(filt * spec, r_norm.shape[-1])


def mpa(r, t, w):
    """Transformer-style wrapper: filter, residual sum, norm + DConv3 FFN."""
    if r.shape != t.shape:
        raise ShapeError(f"modalities differ: {r.shape} vs {t.shape}")
    fused = mpf(nn.layer_norm(r, w.rgb.norm), nn.layer_norm(t, w.thermal.norm), w) + r + t
    return nn.dwconv3(nn.layer_norm(fused, w.norm), w.ffn) + fused
