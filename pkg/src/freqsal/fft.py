"""Mixed-radix FFT engine over numpy arrays.

Lengths are factored into small primes and transformed by recursive
decimation in time; a prime factor larger than ``DIRECT_LIMIT`` falls back
to Bluestein's chirp-z algorithm.  Powers of two above ``DIRECT_LIMIT``
take an iterative radix-2 path that keeps numpy on long contiguous runs.
Every transform is vectorised over all leading axes; large batches are
split into cache-sized blocks of independent rows or planes.

Twiddle tables are built once per length and cached read-only, which keeps
the engine safe to call from several threads.
"""

from functools import lru_cache

import numpy as np

DIRECT_LIMIT = 32
DIRECT_BASE = 16  # any length up to this is a dense matrix product
BLOCK_ELEMENTS = 2**14  # complex values per block of rows (256 KiB)


def _frozen(a):
    a.flags.writeable = False
    return a


def _smallest_factor(n):
    for p in (4, 2, 3, 5):
        if n % p == 0:
            return p
    p = 7
    while p * p <= n:
        if n % p == 0:
            return p
        p += 2
    return n


def _unit_roots(n, k):
    # exp(-2*pi*i*k/n) with k reduced mod n to keep the angle small
    k = np.mod(k, n)
    return np.exp(-2j * np.pi * k / n)


@lru_cache(maxsize=None)
def _dft_matrix(n):
    j = np.arange(n)
    return _frozen(_unit_roots(n, np.outer(j, j)))


@lru_cache(maxsize=None)
def _twiddles(p, m):
    n = p * m
    return _frozen(_unit_roots(n, np.outer(np.arange(p), np.arange(m))))


@lru_cache(maxsize=None)
def _bluestein_plan(n):
    m = 1
    while m < 2 * n - 1:
        m *= 2
    k = np.arange(n)
    # chirp exp(-i*pi*k^2/n); k^2 reduced mod 2n
    chirp = np.exp(-1j * np.pi * np.mod(k * k, 2 * n) / n)
    b = np.zeros(m, dtype=complex)
    b[:n] = np.conj(chirp)
    b[m - n + 1:] = np.conj(chirp[1:][::-1])
    return _frozen(chirp), _frozen(_fft_last(b)), m


def _bluestein(x):
    n = x.shape[-1]
    chirp, fb, m = _bluestein_plan(n)
    a = np.zeros(x.shape[:-1] + (m,), dtype=complex)
    a[..., :n] = x * chirp
    conv = _ifft_pow2(_fft_last(a) * fb)
    return conv[..., :n] * chirp


def _ifft_pow2(x):
    m = x.shape[-1]
    return np.conj(_fft_last(np.conj(x))) / m


def _direct(x):
    # one flat matrix product, so BLAS sees a single large gemm
    n = x.shape[-1]
    flat = np.ascontiguousarray(x, dtype=complex).reshape(-1, n)
    return (flat @ _dft_matrix(n)).reshape(x.shape)


def _butterfly(sub, p):
    """Length-p DFT across axis -2 of ``sub`` (twiddles already applied)."""
    if p == 2:
        return np.concatenate([sub[..., :1, :] + sub[..., 1:, :], sub[..., :1, :] - sub[..., 1:, :]], axis=-2)
    if p == 4:
        s0, s1, s2, s3 = (sub[..., r:r + 1, :] for r in range(4))
        a, b = s0 + s2, s0 - s2
        c, d = s1 + s3, (s1 - s3) * -1j
        return np.concatenate([a + c, b + d, a - c, b - d], axis=-2)
    return _dft_matrix(p) @ sub


@lru_cache(maxsize=None)
def _stage_twiddles(k):
    return _frozen(_unit_roots(2 * k, np.arange(k))[:, None])


def _fft_pow2(x):
    """Power-of-two lengths: dense DFTs of length <= DIRECT_LIMIT over the
    strided subsequences x[b::L], then radix-2 stages that double the
    transform length while halving L.  Every stage works on contiguous
    halves of the last axis, so numpy sees long vectors throughout."""
    n = x.shape[-1]
    lead = x.shape[:-1]
    base = min(n, DIRECT_LIMIT)
    L = n // base
    # (rows, base, L) -> (rows * L, base): one flat gemm for all short DFTs
    cols = np.ascontiguousarray(np.swapaxes(x.reshape((-1, base, L)), -1, -2)).reshape(-1, base)
    X = np.swapaxes((cols @ _dft_matrix(base)).reshape(-1, L, base), -1, -2)
    while X.shape[-2] < n:
        k = X.shape[-2]
        half = X.shape[-1] // 2
        even, odd = X[..., :half], X[..., half:] * _stage_twiddles(k)
        X = np.concatenate([even + odd, even - odd], axis=-2)
    return X.reshape(lead + (n,))


def _fft_last(x):
    """Unnormalised forward DFT along the last axis."""
    n = x.shape[-1]
    if n == 1:
        return x.astype(complex, copy=True)
    if n > DIRECT_LIMIT and n & (n - 1) == 0:
        return _fft_pow2(x)
    p = _smallest_factor(n)
    if n <= DIRECT_BASE or (p == n and n <= DIRECT_LIMIT):
        return _direct(x)
    if p == n:
        return _bluestein(x)
    m = n // p
    lead = x.shape[:-1]
    # x[j*p + r] -> sub[r, j]; length-m transforms of each residue class
    sub = _fft_last(np.swapaxes(x.reshape(lead + (m, p)), -1, -2))
    sub = sub * _twiddles(p, m)
    return _butterfly(sub, p).reshape(lead + (n,))


def _fft_rows(x):
    """:func:`_fft_last` over blocks of rows that fit in cache.

    Rows are independent, so blocking changes no value; it only keeps the
    working set of every pass small for large batches.
    """
    n = x.shape[-1]
    flat = x.reshape(-1, n)
    rows = max(1, BLOCK_ELEMENTS // n)
    if flat.shape[0] <= rows:
        return _fft_last(x)
    out = np.empty(flat.shape, dtype=complex)
    for start in range(0, flat.shape[0], rows):
        out[start:start + rows] = _fft_last(flat[start:start + rows])
    return out.reshape(x.shape)


def fft(x, axis=-1):
    """Forward complex DFT along ``axis`` (no normalisation)."""
    x = np.asarray(x, dtype=complex)
    y = _fft_rows(np.moveaxis(x, axis, -1))
    return np.moveaxis(y, -1, axis)


def ifft(x, axis=-1):
    """Inverse complex DFT along ``axis`` scaled by 1/n."""
    x = np.asarray(x, dtype=complex)
    n = x.shape[axis]
    return np.conj(fft(np.conj(x), axis)) / n


def rfft(x, axis=-1):
    """Real-input DFT along ``axis``, returning bins 0..n//2.

    Even lengths pack pairs of samples into one complex sequence of half
    the length and untangle the two spectra afterwards.  The DC bin (and
    the Nyquist bin for even n) are returned with an exact +0 imaginary
    part, as they are real for any real input.
    """
    x = np.moveaxis(np.asarray(x, dtype=float), axis, -1)
    n = x.shape[-1]
    if n % 2 == 0 and n >= 2:
        h = n // 2
        z = _fft_rows(x[..., 0::2] + 1j * x[..., 1::2])
        zk = np.concatenate([z, z[..., :1]], axis=-1)
        zr = np.conj(zk[..., ::-1])
        even = 0.5 * (zk + zr)
        odd = -0.5j * (zk - zr)
        out = even + _unit_roots(n, np.arange(h + 1)) * odd
        out[..., 0] = out[..., 0].real
        out[..., h] = out[..., h].real
    else:
        out = _fft_rows(x)[..., : n // 2 + 1]
        out[..., 0] = out[..., 0].real
    return np.moveaxis(out, -1, axis)


def irfft(x, n, axis=-1):
    """Inverse of :func:`rfft` for output length ``n``.

    The imaginary parts of the DC and Nyquist bins are ignored.
    """
    x = np.moveaxis(np.asarray(x, dtype=complex), axis, -1)
    if x.shape[-1] != n // 2 + 1:
        raise ValueError(f"half spectrum of length {x.shape[-1]} cannot give {n} samples")
    if n % 2 == 0 and n >= 2:
        # undo the even/odd packing of rfft with a half-length inverse
        h = n // 2
        X = x.copy()
        X[..., 0] = X[..., 0].real
        X[..., h] = X[..., h].real
        lo, hi = X[..., :h], np.conj(X[..., h:0:-1])
        even = 0.5 * (lo + hi)
        odd = 0.5 * (lo - hi) * np.conj(_unit_roots(n, np.arange(h)))
        z = np.conj(_fft_rows(np.conj(even + 1j * odd))) / h
        y = np.empty(x.shape[:-1] + (n,))
        y[..., 0::2] = z.real
        y[..., 1::2] = z.imag
        return np.moveaxis(y, -1, axis)
    full = np.empty(x.shape[:-1] + (n,), dtype=complex)
    full[..., : n // 2 + 1] = x
    tail = n - (n // 2 + 1)
    if tail:
        full[..., n // 2 + 1:] = np.conj(x[..., 1: tail + 1][..., ::-1])
    full[..., 0] = full[..., 0].real
    y = np.conj(_fft_rows(np.conj(full))).real / n
    return np.moveaxis(y, -1, axis)


def _by_planes(fn, x, out_plane, dtype):
    """Apply a 2-D transform plane by plane in cache-sized groups.

    Planes are independent, so grouping changes no value."""
    lead = x.shape[:-2]
    flat = x.reshape((-1,) + x.shape[-2:])
    group = max(1, BLOCK_ELEMENTS // max(1, x.shape[-2] * x.shape[-1]))
    if flat.shape[0] <= group:
        return fn(x)
    out = np.empty((flat.shape[0],) + out_plane, dtype=dtype)
    for start in range(0, flat.shape[0], group):
        out[start:start + group] = fn(flat[start:start + group])
    return out.reshape(lead + out_plane)


def _rfft2(x):
    out = fft(rfft(x, axis=-1), axis=-2)
    h = out.shape[-2]
    if h % 2 == 0:
        out[..., h // 2, 0] = out[..., h // 2, 0].real
        if x.shape[-1] % 2 == 0:
            out[..., h // 2, -1] = out[..., h // 2, -1].real
    return out


def rfft2(x):
    """2-D real DFT over the last two axes; last axis halved."""
    x = np.asarray(x, dtype=float)
    h, w = x.shape[-2:]
    return _by_planes(_rfft2, x, (h, w // 2 + 1), complex)


def irfft2(x, width):
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != width // 2 + 1:
        raise ValueError(f"half spectrum of length {x.shape[-1]} cannot give {width} samples")
    return _by_planes(lambda p: irfft(ifft(p, axis=-2), width, axis=-1), x, (x.shape[-2], width), float)


def fft2(x):
    return fft(fft(x, axis=-1), axis=-2)
