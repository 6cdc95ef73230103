"""Reverse-mode differentiation on an explicit tape.

Operations record themselves on the innermost active :class:`Tape` of the
current thread.  Outside a tape nothing is recorded, so inference pays no
bookkeeping cost.

Gradients of complex tensors use the convention ``dL/dRe + i*dL/dIm``; the
real and imaginary parts are treated as independent real channels.
"""

import threading
from dataclasses import dataclass, field

import numpy as np

_local = threading.local()


class GradientError(RuntimeError):
    """A non-finite gradient appeared during the backward pass."""


@dataclass
class Node:
    op: str
    out: object
    parents: tuple
    vjp: object


@dataclass
class Tape:
    """Execution-ordered record of differentiable operations."""

    nodes: list = field(default_factory=list)

    def __enter__(self):
        stack = _stack()
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _stack().pop()
        return False

    def backward(self, loss):
        """Propagate d(loss)/d(.) to every leaf reachable from ``loss``.

        Leaf gradients are accumulated into ``leaf.grad``.
        """
        if loss.data.size != 1 or np.iscomplexobj(loss.data):
            raise ValueError(f"backward needs a real scalar loss, got shape {loss.shape}")
        grads = {id(loss): np.ones_like(loss.data)}
        keep = {id(loss): loss}
        for node in reversed(self.nodes):
            g = grads.pop(id(node.out), None)
            if g is None:
                continue
            parent_grads = node.vjp(g)
            for parent, pg in zip(node.parents, parent_grads):
                if pg is None or not parent.requires_grad:
                    continue
                if not np.all(np.isfinite(pg)):
                    raise GradientError(f"non-finite gradient produced by '{node.op}'")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
                    keep[key] = parent
        for key, g in grads.items():
            leaf = keep[key]
            if leaf._recorded:
                continue
            leaf.grad = g if leaf.grad is None else leaf.grad + g


def _stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape():
    stack = _stack()
    return stack[-1] if stack else None


def record(op, out, parents, vjp):
    """Attach ``out`` to the active tape if any parent needs a gradient.

    ``vjp`` maps the output cotangent to a tuple with one entry per parent
    (``None`` for parents that take no gradient).
    """
    tape = active_tape()
    if tape is None or not any(p.requires_grad for p in parents):
        return out
    out.requires_grad = True
    out._recorded = True
    tape.nodes.append(Node(op, out, tuple(parents), vjp))
    return out


def backward(tape, loss):
    tape.backward(loss)


def _relative_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < 1e-300:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def grad_check(fn, inputs, seed=0, step=1e-5, samples=24, constants=None):
    """Compare tape gradients of ``fn`` against central differences.

    ``fn`` receives a dict of Tensors (built from the float arrays in
    ``inputs``) and returns a Tensor.  Non-scalar outputs are reduced with
    a fixed random projection.  At most ``samples`` coordinates per input
    are probed numerically.  Returns the largest norm-wise relative error
    over all inputs.  Entries of ``constants`` are passed through as
    Tensors that take no gradient.
    """
    from .tensor import Tensor

    rng = np.random.default_rng(seed)
    base = {k: np.array(v, dtype=float) for k, v in inputs.items()}
    weights = {}

    def reduce(out):
        if out.data.size == 1:
            return out.sum()
        if "r" not in weights:
            weights["r"] = rng.normal(size=out.shape)
        return (out * Tensor(weights["r"])).sum()

    def scalar(arrays, tape_on):
        ts = {k: Tensor(v, requires_grad=tape_on) for k, v in arrays.items()}
        ts.update({k: Tensor(v) for k, v in (constants or {}).items()})
        if not tape_on:
            return float(reduce(fn(ts)).data), None
        with Tape() as tape:
            loss = reduce(fn(ts))
        tape.backward(loss)
        return float(loss.data), {k: ts[k].grad for k in arrays}

    _, analytic = scalar(base, True)
    worst = 0.0
    for name, value in base.items():
        grad = analytic[name]
        if grad is None:
            grad = np.zeros_like(value)
        flat = value.reshape(-1)
        idx = np.arange(flat.size)
        if flat.size > samples:
            idx = rng.choice(flat.size, size=samples, replace=False)
        numeric = np.empty(idx.size)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + step
            fp, _ = scalar(base, False)
            flat[i] = orig - step
            fm, _ = scalar(base, False)
            flat[i] = orig
            numeric[j] = (fp - fm) / (2 * step)
        worst = max(worst, _relative_error(grad.reshape(-1)[idx], numeric))
    return worst
