"""Edge branch: phase enhancement, learnable high-pass, and the block that
merges the two shallow edge features.

Only thermal and fused features enter the edge branch; RGB features carry
too much background texture in their high frequencies.
"""

from dataclasses import dataclass

import numpy as np

from . import nn
from .frcab import FrcabWeights, frcab
from .spectral import amp_phase, irfft2_spatial, polar, rfft2_spatial
from .tensor import ShapeError, Tensor, clamp, concat_channels

HP_SIGMA = 0.1


def highpass_init(h, w, sigma=HP_SIGMA):
    """1 - exp(-(rho/sigma)^2) over the half spectrum; rho is the frequency
    radius in units of the Nyquist frequency."""
    fy = np.fft.fftfreq(h)[:, None] / 0.5
    fx = np.arange(w // 2 + 1)[None, :] / w / 0.5
    rho = np.sqrt(fy**2 + fx**2)
    return 1.0 - np.exp(-((rho / sigma) ** 2))


@dataclass
class HighPassFilter:
    mask: Tensor  # H x (W//2+1), shared over channels

    @classmethod
    def init(cls, store, name, size, sigma=HP_SIGMA):
        return cls(store.add(f"{name}.mask", highpass_init(*size, sigma=sigma)))

    def __call__(self):
        return clamp(self.mask, 0.0, 1.0)


@dataclass
class EfebWeights:
    pep_thermal: nn.Clc
    pep_fused: nn.Clc
    hf: HighPassFilter
    refine: FrcabWeights

    @classmethod
    def init(cls, store, name, channels, size, edge_channels, rng):
        return cls(nn.Clc.init_identity(store, f"{name}.pep_t", channels),
                   nn.Clc.init_identity(store, f"{name}.pep_f", channels),
                   HighPassFilter.init(store, f"{name}.hf", size),
                   FrcabWeights.init(store, f"{name}.frcab", channels, edge_channels, rng))


@dataclass
class FebWeights:
    level1: EfebWeights
    level2: EfebWeights
    merge: nn.Dnru

    @classmethod
    def init(cls, store, name, channels, sizes, edge_channels, rng):
        return cls(EfebWeights.init(store, f"{name}.efeb1", channels[0], sizes[0], edge_channels, rng),
                   EfebWeights.init(store, f"{name}.efeb2", channels[1], sizes[1], edge_channels, rng),
                   nn.Dnru.init(store, f"{name}.merge", 2 * edge_channels, edge_channels, rng))


def pep(x, clc_weights):
    """Half spectrum of ``x`` with its amplitude kept and its phase refined."""
    a, p = amp_phase(rfft2_spatial(x))
    return polar(a, nn.clc(p, clc_weights))


def highpass_residual(t_low, f_low, w):
    """The high-passed sum of the two phase-enhanced spectra, in space."""
    if t_low.shape != f_low.shape:
        raise ShapeError(f"thermal {t_low.shape} and fused {f_low.shape} differ")
    spec = (pep(t_low, w.pep_thermal) + pep(f_low, w.pep_fused)) * w.hf()
    return irfft2_spatial(spec, t_low.shape[-1])


def efeb(t_low, f_low, w):
    return frcab(highpass_residual(t_low, f_low, w) + f_low, w.refine)


def feb(e1, e2, w):
    if tuple(2 * s for s in e2.shape[-2:]) != e1.shape[-2:]:
        raise ShapeError(f"e2 {e2.shape} must be half the resolution of e1 {e1.shape}")
    return nn.dnru(concat_channels([e1, nn.upsample(e2, 2)]), w.merge)


def edge_features(t1, f1, t2, f2, w):
    """Run both EFEBs and the merge; returns (e1, e2, e3)."""
    e1 = efeb(t1, f1, w.level1)
    e2 = efeb(t2, f2, w.level2)
    return e1, e2, feb(e1, e2, w)
