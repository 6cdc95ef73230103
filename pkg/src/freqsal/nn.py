"""Neural primitives: convolutions, activations, normalisation, pooling,
MLP, bilinear upsampling, and the ParamStore that owns every weight."""

from dataclasses import dataclass

import numpy as np

from .autodiff import record
from .tensor import ShapeError, Tensor

LEAKY_SLOPE = 0.01
NORM_EPS = 1e-6
STAR_SCALE = 0.8944
STAR_BIAS = -0.4472


class ParamStore:
    """Named learnable tensors plus their Adam moments.

    Gradients live on the tensors themselves (``value.grad``).
    """

    def __init__(self):
        self.values = {}
        self.adam_m = {}
        self.adam_v = {}

    def add(self, name, value):
        if name in self.values:
            raise KeyError(f"parameter {name!r} registered twice")
        t = Tensor(value, requires_grad=True, name=name)
        self.values[name] = t
        self.adam_m[name] = np.zeros(t.shape)
        self.adam_v[name] = np.zeros(t.shape)
        return t

    def kaiming(self, name, shape, fan_in, rng):
        return self.add(name, rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape))

    def zeros(self, name, shape):
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name):
        return self.values[name]

    def __contains__(self, name):
        return name in self.values

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def items(self):
        return self.values.items()

    def set(self, name, array):
        t = self.values[name]
        array = np.array(array, dtype=float)
        if array.shape != t.shape:
            raise ShapeError(f"{name}: expected {t.shape}, got {array.shape}")
        array.flags.writeable = False
        t.data = array

    def zero_grad(self):
        for t in self.values.values():
            t.grad = None

    def count(self):
        return sum(t.data.size for t in self.values.values())


# ---------------------------------------------------------------- weights


@dataclass
class Conv1:
    w: Tensor  # Cout x Cin
    b: Tensor  # Cout

    @classmethod
    def init(cls, store, name, cin, cout, rng):
        return cls(store.kaiming(f"{name}.w", (cout, cin), cin, rng), store.zeros(f"{name}.b", (cout,)))


@dataclass
class Conv3:
    w: Tensor  # Cout x Cin x 3 x 3
    b: Tensor

    @classmethod
    def init(cls, store, name, cin, cout, rng):
        return cls(store.kaiming(f"{name}.w", (cout, cin, 3, 3), 9 * cin, rng),
                   store.zeros(f"{name}.b", (cout,)))


@dataclass
class PatchConv:
    w: Tensor  # Cout x Cin x k x k, stride k
    b: Tensor

    @classmethod
    def init(cls, store, name, cin, cout, k, rng):
        return cls(store.kaiming(f"{name}.w", (cout, cin, k, k), k * k * cin, rng),
                   store.zeros(f"{name}.b", (cout,)))


@dataclass
class DConv3:
    depth: Tensor  # C x 3 x 3
    depth_b: Tensor
    point: Conv1

    @classmethod
    def init(cls, store, name, cin, cout, rng):
        return cls(store.kaiming(f"{name}.dw", (cin, 3, 3), 9, rng),
                   store.zeros(f"{name}.db", (cin,)),
                   Conv1.init(store, f"{name}.pw", cin, cout, rng))


@dataclass
class Clc:
    first: object
    second: object

    @classmethod
    def init(cls, store, name, cin, cout, rng, kernel=1, hidden=None):
        hidden = hidden or cout
        conv = Conv1 if kernel == 1 else Conv3
        return cls(conv.init(store, f"{name}.0", cin, hidden, rng),
                   conv.init(store, f"{name}.1", hidden, cout, rng))

    @classmethod
    def init_identity(cls, store, name, channels):
        """Exact pass-through for signed input, via
        leaky(x) - leaky(-x) = (1 + slope) x.  Used for stacks that act on
        phases, so a 2*pi wrap at the input stays a 2*pi shift at the output."""
        eye = np.eye(channels)
        first = Conv1(store.add(f"{name}.0.w", np.vstack([eye, -eye])),
                      store.zeros(f"{name}.0.b", (2 * channels,)))
        second = Conv1(store.add(f"{name}.1.w", np.hstack([eye, -eye]) / (1.0 + LEAKY_SLOPE)),
                       store.zeros(f"{name}.1.b", (channels,)))
        return cls(first, second)

    @classmethod
    def init_constant(cls, store, name, cin, cout, rng, bias, hidden=None):
        """Random first layer, zero second layer: the stack outputs ``bias``
        until training moves it. Used for multiplicative gates."""
        hidden = hidden or cout
        first = Conv1.init(store, f"{name}.0", cin, hidden, rng)
        second = Conv1(store.zeros(f"{name}.1.w", (cout, hidden)),
                       store.add(f"{name}.1.b", np.broadcast_to(np.asarray(bias, dtype=float), (cout,))))
        return cls(first, second)


@dataclass
class Norm:
    gamma: Tensor
    beta: Tensor

    @classmethod
    def init(cls, store, name, channels):
        return cls(store.add(f"{name}.g", np.ones((channels, 1, 1))),
                   store.zeros(f"{name}.b", (channels, 1, 1)))


@dataclass
class StarRelu:
    s: Tensor
    b: Tensor

    @classmethod
    def init(cls, store, name):
        return cls(store.add(f"{name}.s", np.array([STAR_SCALE])),
                   store.add(f"{name}.b", np.array([STAR_BIAS])))


@dataclass
class Linear:
    w: Tensor  # out x in
    b: Tensor

    @classmethod
    def init(cls, store, name, cin, cout, rng):
        return cls(store.kaiming(f"{name}.w", (cout, cin), cin, rng), store.zeros(f"{name}.b", (cout,)))


@dataclass
class Mlp:
    fc1: Linear
    fc2: Linear

    @classmethod
    def init(cls, store, name, cin, cout, rng):
        hidden = max(cin // 4, 4)
        return cls(Linear.init(store, f"{name}.fc1", cin, hidden, rng),
                   Linear.init(store, f"{name}.fc2", hidden, cout, rng))


@dataclass
class Dnru:
    conv: DConv3
    norm: Norm

    @classmethod
    def init(cls, store, name, cin, cout, rng):
        return cls(DConv3.init(store, f"{name}.conv", cin, cout, rng), Norm.init(store, f"{name}.norm", cout))


# -------------------------------------------------------------------- ops


def _lead_sum(a, ndim):
    # sum a weight cotangent over any batch axes
    extra = a.ndim - ndim
    return a.sum(axis=tuple(range(extra))) if extra > 0 else a


def conv1x1(x, weights):
    """Per-pixel linear map across channels."""
    w, b = weights.w, weights.b
    cout, cin = w.shape
    if x.shape[-3] != cin:
        raise ShapeError(f"conv1x1 expects {cin} channels, got {x.shape[-3]}")
    lead, (h, wd) = x.shape[:-3], x.shape[-2:]
    xf = x.data.reshape(lead + (cin, h * wd))
    y = w.data @ xf + b.data[:, None]
    out = Tensor.wrap(y.reshape(lead + (cout, h, wd)))

    def vjp(g):
        gf = g.reshape(lead + (cout, h * wd))
        gx = (w.data.T @ gf).reshape(x.shape) if x.requires_grad else None
        gw = _lead_sum(gf @ np.swapaxes(xf, -1, -2), 2) if w.requires_grad else None
        gb = _lead_sum(gf.sum(axis=-1), 1) if b.requires_grad else None
        return gx, gw, gb

    return record("conv1x1", out, (x, w, b), vjp)


def _pad1(a):
    pad = [(0, 0)] * (a.ndim - 2) + [(1, 1), (1, 1)]
    return np.pad(a, pad)


def depthwise3(x, kernel, bias):
    c = x.shape[-3]
    if kernel.shape != (c, 3, 3):
        raise ShapeError(f"depthwise kernel {kernel.shape} does not match {c} channels")
    h, wd = x.shape[-2:]
    xp = _pad1(x.data)
    k = kernel.data
    y = np.zeros(x.shape)
    for dy in range(3):
        for dx in range(3):
            y += k[:, dy, dx, None, None] * xp[..., dy:dy + h, dx:dx + wd]
    y += bias.data[:, None, None]
    out = Tensor.wrap(y)

    def vjp(g):
        gxp = np.zeros(xp.shape) if x.requires_grad else None
        gk = np.zeros(k.shape)
        for dy in range(3):
            for dx in range(3):
                win = xp[..., dy:dy + h, dx:dx + wd]
                gk[:, dy, dx] = _lead_sum((g * win).sum(axis=(-2, -1)), 1)
                if gxp is not None:
                    gxp[..., dy:dy + h, dx:dx + wd] += k[:, dy, dx, None, None] * g
        gx = gxp[..., 1:-1, 1:-1] if gxp is not None else None
        gb = _lead_sum(g.sum(axis=(-2, -1)), 1)
        return gx, gk, gb

    return record("depthwise3", out, (x, kernel, bias), vjp)


def dwconv3(x, weights):
    """Depthwise 3x3 (zero padding 1) followed by a pointwise projection."""
    return conv1x1(depthwise3(x, weights.depth, weights.depth_b), weights.point)


def _im2col3(xp, h, wd):
    # (..., C, H+2, W+2) -> (..., C*9, H*W), rows ordered (c, dy, dx)
    lead, c = xp.shape[:-3], xp.shape[-3]
    cols = np.empty(lead + (c, 3, 3, h, wd))
    for dy in range(3):
        for dx in range(3):
            cols[..., dy, dx, :, :] = xp[..., dy:dy + h, dx:dx + wd]
    return cols.reshape(lead + (c * 9, h * wd))


def conv3x3(x, weights):
    """Dense 3x3 convolution, zero padding 1."""
    w, b = weights.w, weights.b
    cout, cin = w.shape[:2]
    if x.shape[-3] != cin:
        raise ShapeError(f"conv3x3 expects {cin} channels, got {x.shape[-3]}")
    lead, (h, wd) = x.shape[:-3], x.shape[-2:]
    cols = _im2col3(_pad1(x.data), h, wd)
    wm = np.ascontiguousarray(w.data.reshape(cout, cin * 9))
    y = wm @ cols + b.data[:, None]
    out = Tensor.wrap(y.reshape(lead + (cout, h, wd)))

    def vjp(g):
        gf = g.reshape(lead + (cout, h * wd))
        gw = _lead_sum(gf @ np.swapaxes(cols, -1, -2), 2).reshape(w.shape)
        gx = None
        if x.requires_grad:
            gc = (wm.T @ gf).reshape(lead + (cin, 3, 3, h, wd))
            gxp = np.zeros(lead + (cin, h + 2, wd + 2))
            for dy in range(3):
                for dx in range(3):
                    gxp[..., dy:dy + h, dx:dx + wd] += gc[..., dy, dx, :, :]
            gx = gxp[..., 1:-1, 1:-1]
        return gx, gw, _lead_sum(gf.sum(axis=-1), 1)

    return record("conv3x3", out, (x, w, b), vjp)


def patch_conv(x, weights):
    """Non-overlapping k x k convolution with stride k."""
    w, b = weights.w, weights.b
    cout, cin, k, _ = w.shape
    lead, (h, wd) = x.shape[:-3], x.shape[-2:]
    if x.shape[-3] != cin or h % k or wd % k:
        raise ShapeError(f"patch_conv k={k} cannot take input {x.shape}")
    ho, wo = h // k, wd // k
    n = len(lead)
    cols = x.data.reshape(lead + (cin, ho, k, wo, k))
    order = tuple(range(n)) + (n, n + 2, n + 4, n + 1, n + 3)
    cols = cols.transpose(order).reshape(lead + (cin * k * k, ho * wo))
    wm = w.data.reshape(cout, cin * k * k)
    y = wm @ cols + b.data[:, None]
    out = Tensor.wrap(y.reshape(lead + (cout, ho, wo)))

    def vjp(g):
        gf = g.reshape(lead + (cout, ho * wo))
        gw = _lead_sum(gf @ np.swapaxes(cols, -1, -2), 2).reshape(w.shape)
        gx = None
        if x.requires_grad:
            gc = (wm.T @ gf).reshape(lead + (cin, k, k, ho, wo))
            inv = tuple(range(n)) + (n, n + 3, n + 1, n + 4, n + 2)
            gx = gc.transpose(inv).reshape(x.shape)
        return gx, gw, _lead_sum(gf.sum(axis=-1), 1)

    return record("patch_conv", out, (x, w, b), vjp)


def relu(x):
    mask = x.data > 0
    out = Tensor.wrap(np.where(mask, x.data, 0.0))
    return record("relu", out, (x,), lambda g: (g * mask,))


def leaky_relu(x, slope=LEAKY_SLOPE):
    scale = np.where(x.data > 0, 1.0, slope)
    out = Tensor.wrap(x.data * scale)
    return record("leaky_relu", out, (x,), lambda g: (g * scale,))


def sigmoid(x):
    d = x.data
    e = np.exp(-np.abs(d))
    y = np.where(d >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    out = Tensor.wrap(y)
    return record("sigmoid", out, (x,), lambda g: (g * y * (1.0 - y),))


def star_relu(x, weights):
    """s * relu(x)**2 + b with learnable scalars s, b."""
    s, b = weights.s, weights.b
    r = np.maximum(x.data, 0.0)
    out = Tensor.wrap(s.data * r * r + b.data)

    def vjp(g):
        return (g * 2.0 * s.data * r,
                np.array([(g * r * r).sum()]),
                np.array([g.sum()]))

    return record("star_relu", out, (x, s, b), vjp)


def layer_norm(x, weights, eps=NORM_EPS):
    """Normalise the channel vector at each spatial position, then affine."""
    gamma, beta = weights.gamma, weights.beta
    if gamma.shape[0] != x.shape[-3]:
        raise ShapeError(f"norm has {gamma.shape[0]} channels, input {x.shape[-3]}")
    xc = x.data - x.data.mean(axis=-3, keepdims=True)
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-3, keepdims=True) + eps)
    xhat = xc * inv
    out = Tensor.wrap(gamma.data * xhat + beta.data)

    def vjp(g):
        gh = g * gamma.data
        gx = inv * (gh - gh.mean(axis=-3, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-3, keepdims=True))
        ggamma = _lead_sum((g * xhat).sum(axis=(-2, -1), keepdims=True), 3)
        gbeta = _lead_sum(g.sum(axis=(-2, -1), keepdims=True), 3)
        return gx, ggamma, gbeta

    return record("layer_norm", out, (x, gamma, beta), vjp)


def gap(x):
    """Global average pool over space: C x H x W -> C x 1 x 1."""
    return x.mean(axis=(-2, -1), keepdims=True)


def linear(v, weights):
    """Affine map on the last axis."""
    w, b = weights.w, weights.b
    if v.shape[-1] != w.shape[1]:
        raise ShapeError(f"linear expects {w.shape[1]} inputs, got {v.shape[-1]}")
    out = Tensor.wrap(v.data @ w.data.T + b.data)

    def vjp(g):
        g2 = g.reshape(-1, g.shape[-1])
        v2 = v.data.reshape(-1, v.shape[-1])
        return g @ w.data, g2.T @ v2, g2.sum(axis=0)

    return record("linear", out, (v, w, b), vjp)


def mlp(v, weights):
    """Two-layer perceptron with a LeakyReLU between the layers."""
    return linear(leaky_relu(linear(v, weights.fc1)), weights.fc2)


def clc(x, weights):
    """Conv -> LeakyReLU -> Conv (1x1 or 3x3 per the weights)."""
    conv = conv1x1 if isinstance(weights.first, Conv1) else conv3x3
    return conv(leaky_relu(conv(x, weights.first)), weights.second)


clc1 = clc
clc3 = clc


def _up2_axis(a, axis):
    a = np.moveaxis(a, axis, -1)
    p = np.concatenate([a[..., :1], a, a[..., -1:]], axis=-1)
    mid = 0.75 * p[..., 1:-1]
    out = np.empty(a.shape[:-1] + (2 * a.shape[-1],))
    out[..., 0::2] = mid + 0.25 * p[..., :-2]
    out[..., 1::2] = mid + 0.25 * p[..., 2:]
    return np.moveaxis(out, -1, axis)


def _up2_axis_adjoint(g, axis):
    g = np.moveaxis(g, axis, -1)
    ge, go = g[..., 0::2], g[..., 1::2]
    n = ge.shape[-1]
    gp = np.zeros(g.shape[:-1] + (n + 2,))
    gp[..., 1:-1] += 0.75 * (ge + go)
    gp[..., :-2] += 0.25 * ge
    gp[..., 2:] += 0.25 * go
    out = gp[..., 1:-1].copy()
    out[..., 0] += gp[..., 0]
    out[..., -1] += gp[..., -1]
    return np.moveaxis(out, -1, axis)


def upsample2(x):
    """Bilinear 2x upsampling, half-pixel centres, edge clamped."""
    out = Tensor.wrap(_up2_axis(_up2_axis(x.data, -2), -1))

    def vjp(g):
        return (_up2_axis_adjoint(_up2_axis_adjoint(g, -1), -2),)

    return record("upsample2", out, (x,), vjp)


def upsample(x, factor):
    """Bilinear upsampling by a power of two, built from repeated 2x steps."""
    if factor < 1 or factor & (factor - 1):
        raise ValueError(f"upsample factor must be a power of two >= 1, got {factor}")
    while factor > 1:
        x = upsample2(x)
        factor //= 2
    return x


def dnru(x, weights, up=2):
    """DConv3 -> Norm -> ReLU -> bilinear upsample."""
    return upsample(relu(layer_norm(dwconv3(x, weights.conv), weights.norm)), up)
