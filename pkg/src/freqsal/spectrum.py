"""Spectrum dumps for images and named intermediate features."""

import csv
from pathlib import Path

import numpy as np

from . import fft as _fft
from . import io

FEATURE_NAMES = tuple([f"{p}{i}" for p in "rtfd" for i in range(1, 5)] + ["e1", "e2", "e3"])


class UnknownFeature(KeyError):
    def __str__(self):
        return self.args[0]


def _centre(a):
    # move the DC bin to the middle (same as fftshift)
    return np.roll(a, (a.shape[0] // 2, a.shape[1] // 2), axis=(0, 1))


def half_spectrum(x):
    return _fft.rfft2(np.asarray(x, dtype=float))


def amplitude_image(x):
    """log(1 + |X|) of the full spectrum with DC at the centre, scaled to [0, 1]."""
    amp = _centre(np.abs(_fft.fft2(np.asarray(x, dtype=float))))
    img = np.log1p(amp)
    top = img.max()
    return img / top if top > 0 else img


def phase_image(x, guard=1e-9):
    """Phase mapped from [-pi, pi] to [0, 1]; bins with negligible modulus read 0.5."""
    spec = _centre(_fft.fft2(np.asarray(x, dtype=float)))
    scale = max(np.abs(spec).max(), 1.0)
    pha = np.where(np.abs(spec) > guard * scale, np.angle(spec), 0.0)
    return (pha + np.pi) / (2 * np.pi)


def write_csv(path, X):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["u", "v", "re", "im", "amplitude", "phase"])
        for u in range(X.shape[0]):
            for v in range(X.shape[1]):
                z = X[u, v]
                out.writerow([u, v, repr(float(z.real)), repr(float(z.imag)), repr(float(abs(z))),
                              repr(float(np.arctan2(z.imag + 0.0, z.real)))])


def read_csv(path):
    """Half spectrum back from a dump, as a complex array."""
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    h = max(int(r["u"]) for r in rows) + 1
    w = max(int(r["v"]) for r in rows) + 1
    X = np.zeros((h, w), dtype=complex)
    for r in rows:
        X[int(r["u"]), int(r["v"])] = float(r["re"]) + 1j * float(r["im"])
    return X


def dump(x, out_dir, stem="spectrum"):
    """Write <stem>_amplitude.pgm, <stem>_phase.pgm and <stem>.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a single 2-D map, got shape {x.shape}")
    io.save_gray(out / f"{stem}_amplitude.pgm", amplitude_image(x))
    io.save_gray(out / f"{stem}_phase.pgm", phase_image(x))
    write_csv(out / f"{stem}.csv", half_spectrum(x))
    return out


def image_plane(path):
    """Gray plane of a PGM, or the channel mean of a PPM."""
    img = io.read_pnm(path).astype(float) / 255.0
    return img.mean(axis=2) if img.ndim == 3 else img


def feature_plane(model, rgb, thermal, name, channel=0):
    if name not in FEATURE_NAMES:
        raise UnknownFeature(f"unknown feature {name!r}; valid names: {', '.join(FEATURE_NAMES)}")
    feat = model(rgb, thermal).features[name].data
    if not 0 <= channel < feat.shape[-3]:
        raise ValueError(f"{name} has {feat.shape[-3]} channels, asked for channel {channel}")
    return feat[..., channel, :, :].reshape(feat.shape[-2:])
