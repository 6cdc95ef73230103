"""Save and restore a model together with the config it was built from."""

from . import config as _config
from . import io
from .model import Model


def save(path, cfg, model):
    io.save_checkpoint(path, _config.to_text(cfg), ((n, t.data) for n, t in model.store.items()))


def load(path):
    """Returns (Config, Model) with the stored weights installed."""
    text, params = io.load_checkpoint(path)
    cfg = _config.from_text(text)
    model = Model(cfg.model)
    expected, found = list(model.store), list(params)
    if expected != found:
        extra = sorted(set(found) - set(expected))
        lacking = sorted(set(expected) - set(found))
        raise io.FormatError(f"{path}: parameters do not match the config "
                             f"(unexpected {extra[:5]}, missing {lacking[:5]})")
    for name, arr in params.items():
        model.store.set(name, arr)
    return cfg, model
