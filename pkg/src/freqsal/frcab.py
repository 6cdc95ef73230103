"""Residual channel attention computed in the channel-Fourier domain."""

from dataclasses import dataclass

from . import nn
from .spectral import amp_phase, irfft_channel, polar, rfft_channel


@dataclass
class FrcabWeights:
    body: nn.Clc  # CLC3, channel preserving
    gate_amp: nn.Clc  # CLC1, C -> C//2+1
    gate_pha: nn.Clc
    out: nn.Dnru

    @classmethod
    def init(cls, store, name, channels, out_channels, rng):
        cb = channels // 2 + 1
        return cls(nn.Clc.init(store, f"{name}.body", channels, channels, rng, kernel=3),
                   nn.Clc.init_constant(store, f"{name}.gate_amp", channels, cb, rng, 1.0, hidden=channels),
                   nn.Clc.init_constant(store, f"{name}.gate_pha", channels, cb, rng, 1.0, hidden=channels),
                   nn.Dnru.init(store, f"{name}.out", channels, out_channels, rng))

    @property
    def out_channels(self):
        return self.out.norm.gamma.shape[0]


def attention(body, w):
    """Per-channel attention field (C x 1 x 1) from the pooled body output.

    The pooled descriptor is moved along channels to the Fourier domain;
    its amplitude and phase are each scaled by a gate predicted from the
    same descriptor, then brought back.
    """
    c = body.shape[-3]
    pooled = nn.gap(body)
    a, p = amp_phase(rfft_channel(pooled))
    a = a * nn.clc(pooled, w.gate_amp)
    p = p * nn.clc(pooled, w.gate_pha)
    return irfft_channel(polar(a, p), c)


def pre_projection(x, w):
    body = nn.clc(x, w.body)
    return attention(body, w) * body + x


def frcab(x, w, up=2):
    """Attention-weighted body plus residual, then DNRU to the output
    channel count at ``up`` times the resolution."""
    return nn.dnru(pre_projection(x, w), w.out, up)
