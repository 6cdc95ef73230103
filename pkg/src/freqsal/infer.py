"""Batch inference over a paired directory, and evaluation of saved maps."""

import logging
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io, metrics
from .data import DatasetIndex, resize

log = logging.getLogger(__name__)


class SizeMismatch(ValueError):
    pass


def _prepare(x, size, ident, strict):
    h, w = x.shape[-2:]
    if (h, w) == (size, size):
        return x
    msg = f"{ident}: input is {h}x{w}, model expects {size}x{size}"
    if strict:
        raise SizeMismatch(msg)
    log.warning("%s; resizing", msg)
    return resize(x, size)


def predict(model, rgb, thermal):
    """Saliency and edge probability maps (H x W) for one pair."""
    bundle = model(rgb[None], thermal[None])
    return bundle.S.data[0, 0], bundle.E_pred.data[0, 0]


def run(model, input_dir, out_dir, strict=False):
    """Write saliency/<id>.pgm and edge/<id>.pgm for every pair in
    ``input_dir`` (rgb/ and thermal/ folders). Maps are returned at the
    original image size. Pairs run one at a time so the bytes do not
    depend on how the set is split."""
    index = DatasetIndex.scan(input_dir, split="test", require_gt=False)
    out = Path(out_dir)
    for sub in ("saliency", "edge"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    size = model.cfg.input_size
    written = []
    for rec in index.records:
        rgb = io.load_rgb(rec.rgb)
        thermal = io.load_gray(rec.thermal)[None]
        if rgb.shape[-2:] != thermal.shape[-2:]:
            raise SizeMismatch(f"{rec.ident}: rgb {rgb.shape[-2:]} and thermal {thermal.shape[-2:]} differ")
        orig = rgb.shape[-2:]
        S, E = predict(model, _prepare(rgb, size, rec.ident, strict), _prepare(thermal, size, rec.ident, strict))
        if orig != (size, size):
            S, E = resize_to(S, orig), resize_to(E, orig)
        io.save_gray(out / "saliency" / f"{rec.ident}.pgm", S)
        io.save_gray(out / "edge" / f"{rec.ident}.pgm", E)
        written.append(rec.ident)
    return written


def resize_to(x, shape):
    zoom = (shape[0] / x.shape[0], shape[1] / x.shape[1])
    return np.clip(ndimage.zoom(x, zoom, order=1, mode="nearest", grid_mode=True), 0.0, 1.0)


def evaluate_dirs(pred_dir, gt_dir, out_dir=None):
    """Score every <id>.pgm in ``gt_dir`` against the same name in ``pred_dir``."""
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    gts = sorted(gt_dir.glob("*.pgm"))
    if not gts:
        raise FileNotFoundError(f"no ground-truth maps in {gt_dir}")
    missing = [str(pred_dir / g.name) for g in gts if not (pred_dir / g.name).exists()]
    if missing:
        raise FileNotFoundError(f"{len(missing)} prediction(s) missing:\n  " + "\n  ".join(missing))
    pairs = []
    for g in gts:
        S, G = io.load_gray(pred_dir / g.name), (io.load_gray(g) >= 0.5).astype(float)
        if S.shape != G.shape:
            S = resize_to(S, G.shape)
        pairs.append((g.stem, S, G))
    rows, curve = metrics.evaluate(pairs)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_rows_csv(out / "metrics.csv", rows)
        if curve is not None:
            metrics.write_curve_csv(out / "pr_curve.csv", curve)
    return rows, curve
