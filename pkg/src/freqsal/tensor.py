"""Dense float64 tensors with channel x height x width semantics.

Feature maps are ``C x H x W`` arrays, optionally preceded by a batch axis.
Every operation addresses channels as axis -3 and space as axes -2/-1, so
batched and unbatched tensors share one code path.  A tensor may hold
complex values (half spectra); see :mod:`freqsal.autodiff` for the gradient
convention.
"""

import numpy as np

from .autodiff import record


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_recorded", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, _copy=True):
        arr = np.array(data) if _copy else np.asarray(data)
        if arr.dtype.kind == "c":
            arr = arr.astype(np.complex128, copy=False)
        else:
            arr = arr.astype(np.float64, copy=False)
        arr.flags.writeable = False
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._recorded = False
        self.name = name

    @classmethod
    def wrap(cls, arr):
        return cls(arr, _copy=False)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def is_complex(self):
        return self.data.dtype.kind == "c"

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"Tensor({kind}, shape={self.shape})"

    def __getitem__(self, index):
        return index_(self, index)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def create(shape, fill=0.0, data=None):
    """Build a tensor of ``shape`` from a fill value or flat row-major data."""
    shape = tuple(int(s) for s in shape)
    if any(s < 1 for s in shape):
        raise ShapeError(f"extents must be >= 1, got {shape}")
    if data is None:
        return Tensor(np.full(shape, fill, dtype=float))
    flat = np.asarray(data).reshape(-1)
    if flat.size != int(np.prod(shape)):
        raise ShapeError(f"{flat.size} values cannot fill shape {shape}")
    return Tensor(flat.reshape(shape))


def zeros(shape):
    return Tensor.wrap(np.zeros(shape))


def ones(shape):
    return Tensor.wrap(np.ones(shape))


def fit_grad(g, like):
    """Reduce a broadcast cotangent back to the shape/dtype of ``like``."""
    if g.shape != like.shape:
        extra = g.ndim - like.ndim
        if extra > 0:
            g = g.sum(axis=tuple(range(extra)))
        axes = tuple(i for i, n in enumerate(like.shape) if n == 1 and g.shape[i] != 1)
        if axes:
            g = g.sum(axis=axes, keepdims=True)
    if not like.is_complex and np.iscomplexobj(g):
        g = g.real
    return g


def _broadcast_shape(a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    out = Tensor.wrap(a.data + b.data)
    return record("add", out, (a, b), lambda g: (fit_grad(g, a), fit_grad(g, b)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    out = Tensor.wrap(a.data - b.data)
    return record("sub", out, (a, b), lambda g: (fit_grad(g, a), fit_grad(-g, b)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    out = Tensor.wrap(a.data * b.data)

    def vjp(g):
        ga = fit_grad(g * np.conj(b.data), a) if a.requires_grad else None
        gb = fit_grad(g * np.conj(a.data), b) if b.requires_grad else None
        return ga, gb

    return record("mul", out, (a, b), vjp)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if b.is_complex:
        raise TypeError("division by a complex tensor is not supported")
    _broadcast_shape(a, b)
    out = Tensor.wrap(a.data / b.data)

    def vjp(g):
        ga = fit_grad(g / b.data, a) if a.requires_grad else None
        gb = None
        if b.requires_grad:
            gb = fit_grad(-g * np.conj(a.data) / b.data**2, b)
        return ga, gb

    return record("div", out, (a, b), vjp)


def elementwise(op, a, b):
    """Apply ``add``, ``sub`` or ``mul`` with extent-1 broadcasting."""
    table = {"add": add, "sub": sub, "mul": mul}
    if op not in table:
        raise ValueError(f"unknown elementwise op {op!r}")
    return table[op](a, b)


def sum_(x, axis=None, keepdims=False):
    out = Tensor.wrap(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)))

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return record("sum", out, (x,), vjp)


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(sum_(x, axis, keepdims), 1.0 / n)


def reshape(x, shape):
    out = Tensor.wrap(x.data.reshape(shape))
    return record("reshape", out, (x,), lambda g: (g.reshape(x.shape),))


def index_(x, index):
    out = Tensor.wrap(np.array(x.data[index]))

    def vjp(g):
        full = np.zeros(x.shape, dtype=g.dtype if x.is_complex else float)
        full[index] = g.real if not x.is_complex else g
        return (full,)

    return record("index", out, (x,), vjp)


def concat_channels(tensors):
    """Stack feature maps along the channel axis, order preserved."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("nothing to concatenate")
    spatial = {t.shape[:-3] + t.shape[-2:] for t in tensors}
    if len(spatial) != 1:
        raise ShapeError(f"spatial extents differ: {[t.shape for t in tensors]}")
    if len(tensors) == 1:
        return tensors[0]
    out = Tensor.wrap(np.concatenate([t.data for t in tensors], axis=-3))
    bounds = np.cumsum([0] + [t.shape[-3] for t in tensors])

    def vjp(g):
        return tuple(g[..., bounds[i]: bounds[i + 1], :, :] for i in range(len(tensors)))

    return record("concat", out, tensors, vjp)


def slice_channels(x, start, stop):
    return index_(x, (Ellipsis, slice(start, stop), slice(None), slice(None)))


def exp(x):
    out = Tensor.wrap(np.exp(x.data))
    return record("exp", out, (x,), lambda g: (g * out.data,))


def log(x):
    out = Tensor.wrap(np.log(x.data))
    return record("log", out, (x,), lambda g: (g / x.data,))


def square(x):
    out = Tensor.wrap(x.data * x.data)
    return record("square", out, (x,), lambda g: (2.0 * g * x.data,))


def clamp(x, lo, hi):
    """Clip to [lo, hi]; the gradient is zero where clipping is active."""
    inside = (x.data >= lo) & (x.data <= hi)
    out = Tensor.wrap(np.clip(x.data, lo, hi))
    return record("clamp", out, (x,), lambda g: (g * inside,))


def real(z):
    out = Tensor.wrap(z.data.real.copy())
    return record("real", out, (z,), lambda g: (g.astype(complex),))


def imag(z):
    out = Tensor.wrap(z.data.imag.copy())
    return record("imag", out, (z,), lambda g: (1j * g,))


def make_complex(re, im):
    out = Tensor.wrap(re.data + 1j * im.data)
    return record("complex", out, (re, im), lambda g: (fit_grad(g.real, re), fit_grad(g.imag, im)))


def abs2(z):
    """Squared modulus, real output."""
    out = Tensor.wrap((z.data * np.conj(z.data)).real)

    def vjp(g):
        return (2.0 * g * z.data,)

    return record("abs2", out, (z,), vjp)


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    out = Tensor.wrap(p)

    def vjp(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return record("softmax", out, (x,), vjp)


def detach(x):
    return Tensor.wrap(x.data)
