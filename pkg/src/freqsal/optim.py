"""Adam and the step-decay learning-rate schedule."""

import numpy as np

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def adam_step(store, lr, t, beta1=BETA1, beta2=BETA2, eps=EPS):
    """One bias-corrected Adam update of every parameter holding a gradient.

    ``t`` is the 1-based step count.  Parameters without a gradient are
    left untouched (their moments are not decayed either).
    """
    if t < 1:
        raise ValueError("Adam step count starts at 1")
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in store.items():
        g = p.grad
        if g is None:
            continue
        m = store.adam_m[name]
        v = store.adam_v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        new = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new.flags.writeable = False
        p.data = new


def step_decay(base_lr, epoch, total_epochs, segments=3, factor=0.1):
    """Split the run into equal segments and scale the rate by ``factor``
    at each boundary (epoch is 0-based)."""
    if total_epochs <= 0:
        return base_lr
    stage = min(segments - 1, (segments * epoch) // total_epochs)
    return base_lr * factor**stage
