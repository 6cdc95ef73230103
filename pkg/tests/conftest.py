import numpy as np
import pytest

from freqsal import nn
from freqsal.model import Model, ModelConfig

TOY = dict(input_size=32, stage_channels=(4, 4, 4, 4), filters=2, edge_channels=4)


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), 1e-300)
    return float(np.abs(a - b).max(initial=0.0) / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def store():
    return nn.ParamStore()


@pytest.fixture(scope="session")
def toy_model():
    return Model(ModelConfig(**TOY))


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    from freqsal.data import write_synthetic

    root = tmp_path_factory.mktemp("synth")
    write_synthetic(root, 4, size=32, seed=3)
    return root


def jitter(store, rng, scale=0.3, prefix=""):
    """Perturb every parameter under ``prefix`` so tests leave the special
    initialisation and exercise general weights."""
    for name, t in store.items():
        if name.startswith(prefix):
            store.set(name, t.data + scale * rng.normal(size=t.shape))


def param_grad_check(store, names, loss_fn, seed=0, step=1e-5, samples=6):
    """Central differences on sampled coordinates of named parameters
    against the tape gradient of the scalar ``loss_fn()``."""
    from freqsal.autodiff import Tape

    rng = np.random.default_rng(seed)
    store.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    worst = 0.0
    for name in names:
        t = store[name]
        grad = np.zeros(t.shape) if t.grad is None else t.grad
        base = t.data.copy()
        idx = rng.choice(base.size, size=min(samples, base.size), replace=False)
        numeric = []
        for i in idx:
            vals = []
            for sign in (1, -1):
                arr = base.copy().reshape(-1)
                arr[i] += sign * step
                store.set(name, arr.reshape(base.shape))
                vals.append(float(loss_fn().data))
            numeric.append((vals[0] - vals[1]) / (2 * step))
        store.set(name, base)
        a, b = grad.reshape(-1)[idx], np.array(numeric)
        scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
        worst = max(worst, float(np.linalg.norm(a - b) / scale))
    return worst
