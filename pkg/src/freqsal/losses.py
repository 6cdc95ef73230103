"""Training objective: Canny edge targets, BCE, soft IoU, the co-focus
frequency loss with its weight matrix, and the weighted total."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from . import fft as _fft
from .spectral import hermitian_weights, rfft2_spatial
from .tensor import ShapeError, Tensor, abs2, as_tensor, clamp, log, mul

BCE_FLOOR = 1e-7
IOU_EPS = 1.0


@dataclass
class LossWeights:
    lambda_s: float = 1.0
    lambda_d: float = 1.0
    lambda_e: float = 1.0
    lambda_cfl: float = 1.0
    alpha: float = 1.0
    canny_sigma: float = 1.4
    canny_low: float = 0.1
    canny_high: float = 0.2

    def __post_init__(self):
        for key in ("lambda_s", "lambda_d", "lambda_e", "lambda_cfl", "alpha"):
            if getattr(self, key) < 0:
                raise ValueError(f"{key} must be >= 0, got {getattr(self, key)}")
        if not 0 <= self.canny_low <= self.canny_high <= 1:
            raise ValueError("canny thresholds need 0 <= low <= high <= 1")

    def to_dict(self):
        return asdict(self)


# ------------------------------------------------------------------ canny


def _gauss5(sigma):
    r = np.arange(-2, 3)
    k = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * sigma**2))
    return k / k.sum()


def _nms(mag, gy, gx):
    # quantise the gradient direction to 0/45/90/135 degrees
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180
    p = np.pad(mag, 1)
    h, w = mag.shape
    shifted = {(dy, dx): p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy in (-1, 0, 1) for dx in (-1, 0, 1)}
    bins = [((angle < 22.5) | (angle >= 157.5), (0, 1)),
            ((angle >= 22.5) & (angle < 67.5), (1, 1)),
            ((angle >= 67.5) & (angle < 112.5), (1, 0)),
            ((angle >= 112.5) & (angle < 157.5), (1, -1))]
    keep = np.zeros(mag.shape, dtype=bool)
    for sel, (dy, dx) in bins:
        a, b = shifted[dy, dx], shifted[-dy, -dx]
        keep |= sel & (mag >= a) & (mag >= b)
    return np.where(keep, mag, 0.0)


def canny_edges(G, sigma=1.4, low=0.1, high=0.2):
    """Binary edge map of a binary mask (H x W, or any leading axes).

    Gaussian smoothing (5x5), Sobel gradients, non-maximum suppression
    along four directions, then hysteresis with thresholds given as
    fractions of the maximum gradient magnitude.
    """
    G = np.asarray(G.data if isinstance(G, Tensor) else G, dtype=float)
    if G.ndim > 2:
        flat = G.reshape((-1,) + G.shape[-2:])
        return np.stack([canny_edges(g, sigma, low, high) for g in flat]).reshape(G.shape)
    smooth = ndimage.convolve(G, _gauss5(sigma), mode="nearest")
    gy = ndimage.sobel(smooth, axis=0, mode="nearest")
    gx = ndimage.sobel(smooth, axis=1, mode="nearest")
    mag = np.hypot(gx, gy)
    top = mag.max()
    if top <= 0:
        return np.zeros_like(G)
    thin = _nms(mag, gy, gx)
    strong = thin >= high * top
    weak = thin >= low * top
    labels, n = ndimage.label(weak, structure=np.ones((3, 3)))
    if n == 0:
        return np.zeros_like(G)
    hit = np.zeros(n + 1, dtype=bool)
    hit[np.unique(labels[strong])] = True
    hit[0] = False
    return hit[labels].astype(float)


# ------------------------------------------------------------------ spatial


def _pair(p, g):
    p, g = as_tensor(p), as_tensor(g)
    if p.shape != g.shape:
        raise ShapeError(f"prediction {p.shape} and target {g.shape} differ")
    return p, g


def bce_loss(p, g):
    """Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]."""
    p, g = _pair(p, g)
    p = clamp(p, BCE_FLOOR, 1.0 - BCE_FLOOR)
    terms = g * log(p) + (1.0 - g) * log(1.0 - p)
    return -terms.mean()


def _per_sample_mean(x):
    # x holds one value per sample (any leading axes); average them
    return x.mean() if x.ndim else x


def iou_loss(p, g, eps=IOU_EPS):
    """Soft IoU loss per sample (over the last three axes), batch-averaged."""
    p, g = _pair(p, g)
    axes = tuple(range(-min(p.ndim, 3), 0))
    inter = (p * g).sum(axis=axes)
    union = (p + g - p * g).sum(axis=axes)
    return _per_sample_mean(1.0 - (inter + eps) / (union + eps))


# ------------------------------------------------------------------ frequency


def _np(x):
    return np.asarray(x.data if isinstance(x, Tensor) else x, dtype=float)


def _mean_amplitude(X, width):
    # mean |X| over the full spectrum, read off the half spectrum
    c = hermitian_weights(width)
    h = X.shape[-2]
    return (np.abs(X) * c).sum(axis=(-2, -1), keepdims=True) / (h * width)


def cfm_weights(co_r, co_t, E_pred, E, alpha=1.0):
    """Co-focus frequency matrix on the half spectrum, as a plain array.

    The co-director spectra keep their phase and have their amplitude
    flattened to its mean. The result carries no gradient.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    arrays = [_np(x) for x in (co_r, co_t, E_pred, E)]
    if len({a.shape for a in arrays}) != 1:
        raise ShapeError(f"shapes differ: {[a.shape for a in arrays]}")
    width = arrays[0].shape[-1]
    R, T, P, F = (_fft.rfft2(a) for a in arrays)
    R = _mean_amplitude(R, width) * np.exp(1j * np.angle(R))
    T = _mean_amplitude(T, width) * np.exp(1j * np.angle(T))
    dist = np.abs(R - F) + np.abs(T - F) + np.abs(P - F)
    if alpha == 0:
        return np.ones_like(dist)
    return dist**alpha


def cfl_loss(E_pred, E, w):
    """(1/HW) sum over the full spectrum of w |FFT(E_pred) - FFT(E)|^2.

    Evaluated on the half spectrum with bins that have a Hermitian twin
    counted twice. Summed per sample and averaged over the batch.
    """
    E_pred, E = _pair(E_pred, E)
    h, width = E.shape[-2:]
    w = np.asarray(w, dtype=float)
    if w.shape != E.shape[:-1] + (width // 2 + 1,):
        raise ShapeError(f"weights {w.shape} do not fit the half spectrum of {E.shape}")
    scale = w * hermitian_weights(width) / (h * width)
    energy = mul(abs2(rfft2_spatial(E_pred - E)), scale)
    axes = tuple(range(-min(energy.ndim, 3), 0))
    return _per_sample_mean(energy.sum(axis=axes))


# ------------------------------------------------------------------ total


def _target(x, like):
    x = _np(x)
    if x.shape != like.shape:
        x = x.reshape(like.shape)
    return Tensor.wrap(x)


def total_loss(bundle, G, lw=None, E=None, cfm=None):
    """Weighted sum of saliency, decoder, edge and co-focus terms.

    ``E`` defaults to the Canny edges of ``G``; ``cfm`` may hold a
    precomputed weight matrix. Returns (loss tensor, breakdown dict).
    """
    lw = lw or LossWeights()
    S = bundle.S
    G = _target(G, S)
    E = _target(canny_edges(G.data, lw.canny_sigma, lw.canny_low, lw.canny_high) if E is None else E, S)
    if cfm is None:
        cfm = cfm_weights(bundle.co_r, bundle.co_t, bundle.E_pred, E, lw.alpha)
    terms = {
        "S": bce_loss(S, G) + iou_loss(S, G),
        "D": sum((bce_loss(s, G) + iou_loss(s, G) for s in bundle.side[1:]),
                 bce_loss(bundle.side[0], G) + iou_loss(bundle.side[0], G)),
        "E": bce_loss(bundle.E_pred, E),
        "CFL": cfl_loss(bundle.E_pred, E, cfm),
    }
    lam = {"S": lw.lambda_s, "D": lw.lambda_d, "E": lw.lambda_e, "CFL": lw.lambda_cfl}
    weighted = {k: terms[k] * lam[k] for k in terms}
    total = weighted["S"] + weighted["D"] + weighted["E"] + weighted["CFL"]
    breakdown = {f"L_{k}": float(v.item()) for k, v in terms.items()}
    breakdown.update({f"w_{k}": float(v.item()) for k, v in weighted.items()})
    breakdown["total"] = float(total.item())
    return total, breakdown
