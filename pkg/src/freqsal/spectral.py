"""Differentiable real FFTs, amplitude/phase views and a brute-force DFT.

Convention: forward transforms are unnormalised, inverses carry 1/n per
transformed axis.  Spatial transforms act on the last two axes and keep
the half spectrum ``H x (W//2 + 1)``; channel transforms act on axis -3 and
keep ``C//2 + 1`` bins.
"""

from typing import NamedTuple

import numpy as np

from . import fft as _fft
from .autodiff import record
from .tensor import ShapeError, Tensor

# below this modulus the phase is pinned to 0 and its gradient dropped
AMP_GUARD = 1e-12
ORACLE_LIMIT = 64


class SpectralPair(NamedTuple):
    amplitude: Tensor
    phase: Tensor


def hermitian_weights(n):
    """Multiplicity of each half-spectrum bin in the full spectrum."""
    c = np.full(n // 2 + 1, 2.0)
    c[0] = 1.0
    if n % 2 == 0:
        c[-1] = 1.0
    return c


def _half_adjoint(g, n, axis):
    # adjoint of x -> rfft(x)[:n//2+1] for real x: Re(F^H g)
    g = np.moveaxis(g, axis, -1)
    full = np.zeros(g.shape[:-1] + (n,), dtype=complex)
    full[..., : g.shape[-1]] = g
    out = np.conj(_fft._fft_last(np.conj(full))).real
    return np.moveaxis(out, -1, axis)


def rfft2_spatial(x):
    """Per-channel 2-D DFT over (H, W), last axis halved."""
    if x.is_complex:
        raise TypeError("rfft2_spatial expects a real tensor")
    h, w = x.shape[-2:]
    out = Tensor.wrap(_fft.rfft2(x.data))

    def vjp(g):
        g = np.conj(_fft.fft(np.conj(g), axis=-2))
        return (_half_adjoint(g, w, -1),)

    return record("rfft2", out, (x,), vjp)


def irfft2_spatial(X, out_width):
    h, wh = X.shape[-2:]
    if wh != out_width // 2 + 1:
        raise ShapeError(f"half spectrum width {wh} does not match output width {out_width}")
    out = Tensor.wrap(_fft.irfft2(X.data, out_width))
    c = hermitian_weights(out_width)

    def vjp(g):
        return (_fft.rfft2(g) * (c / (h * out_width)),)

    return record("irfft2", out, (X,), vjp)


def rfft_channel(x):
    """Real DFT along the channel axis at every spatial position."""
    if x.is_complex:
        raise TypeError("rfft_channel expects a real tensor")
    c = x.shape[-3]
    out = Tensor.wrap(_fft.rfft(x.data, axis=-3))
    return record("rfft_channel", out, (x,), lambda g: (_half_adjoint(g, c, -3),))


def irfft_channel(X, out_channels):
    if X.shape[-3] != out_channels // 2 + 1:
        raise ShapeError(f"{X.shape[-3]} channel bins do not match {out_channels} channels")
    out = Tensor.wrap(_fft.irfft(X.data, out_channels, axis=-3))
    c = hermitian_weights(out_channels)[:, None, None]

    def vjp(g):
        return (_fft.rfft(g, axis=-3) * (c / out_channels),)

    return record("irfft_channel", out, (X,), vjp)


def amplitude(X):
    z = X.data
    a = np.abs(z)
    out = Tensor.wrap(a)

    def vjp(g):
        safe = np.where(a < AMP_GUARD, 1.0, a)
        return (np.where(a < AMP_GUARD, 0.0, g * z / safe),)

    return record("amplitude", out, (X,), vjp)


def phase(X):
    z = X.data
    a = np.abs(z)
    # +0.0 folds a signed zero imaginary part so the negative real axis maps to +pi
    p = np.where(a < AMP_GUARD, 0.0, np.arctan2(z.imag + 0.0, z.real))
    out = Tensor.wrap(p)

    def vjp(g):
        safe = np.where(a < AMP_GUARD, 1.0, a)
        return (np.where(a < AMP_GUARD, 0.0, g * 1j * z / safe**2),)

    return record("phase", out, (X,), vjp)


def amp_phase(X):
    """Split a complex tensor into (modulus, angle in (-pi, pi])."""
    if not X.is_complex:
        X = Tensor.wrap(X.data.astype(complex)) if not X.requires_grad else _to_complex(X)
    return SpectralPair(amplitude(X), phase(X))


def _to_complex(x):
    out = Tensor.wrap(x.data.astype(complex))
    return record("to_complex", out, (x,), lambda g: (g.real,))


def polar(a, p):
    """a * exp(i p) with no sign restriction on ``a``."""
    rot = np.exp(1j * p.data)
    out = Tensor.wrap(a.data * rot)

    def vjp(g):
        w = np.conj(g) * rot
        return (w.real if a.requires_grad else None,
                -a.data * w.imag if p.requires_grad else None)

    return record("polar", out, (a, p), vjp)


def complex_from(pair):
    """Recompose a SpectralPair; amplitudes must be nonnegative."""
    a, p = pair
    if a.shape != p.shape:
        raise ShapeError(f"amplitude {a.shape} and phase {p.shape} differ")
    if np.any(a.data < 0):
        raise ValueError("amplitude must be nonnegative")
    return polar(a, p)


def dft_oracle(x, axes):
    """Full-spectrum DFT by direct summation; test-only reference.

    Each transformed axis is limited to ``ORACLE_LIMIT`` points.
    """
    arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=complex)
    for ax in np.atleast_1d(axes):
        n = arr.shape[ax]
        if n > ORACLE_LIMIT:
            raise ValueError(f"oracle refuses axis of length {n} (> {ORACLE_LIMIT})")
        j = np.arange(n)
        kernel = np.exp(-2j * np.pi * ((np.outer(j, j)) % n) / n)
        moved = np.moveaxis(arr, ax, -1)
        acc = np.zeros_like(moved)
        for k in range(n):
            acc[..., k] = (moved * kernel[k]).sum(axis=-1)
        arr = np.moveaxis(acc, -1, ax)
    return Tensor.wrap(arr)
