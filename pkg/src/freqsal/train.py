"""Training loop: Adam with step decay, per-step loss log, checkpoint."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint
from .autodiff import Tape
from .data import DatasetIndex, Loader
from .losses import total_loss
from .model import Model
from .optim import adam_step, step_decay

LOG_FIELDS = ["epoch", "step", "lr", "total", "L_S", "L_D", "L_E", "L_CFL"]


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainResult:
    model: Model
    steps: int
    history: list = field(default_factory=list)  # one breakdown dict per step
    checkpoint: Path = None


def train_step(model, batch, loss_weights, lr, t):
    rgb, thermal, gt = batch[:3]
    model.store.zero_grad()
    with Tape() as tape:
        bundle = model(rgb, thermal)
        loss, breakdown = total_loss(bundle, gt, loss_weights)
        if not math.isfinite(breakdown["total"]):
            bad = [k for k, v in breakdown.items() if not math.isfinite(v)]
            raise TrainingError(f"step {t}: non-finite loss terms {bad}")
    tape.backward(loss)
    adam_step(model.store, lr, t)
    return breakdown


def train(cfg, out_dir=None, index=None, max_steps=None, threads=None, log=None):
    """Train from scratch on ``cfg.data.root`` (or a given index).

    Writes ``loss.csv`` (one row per step), ``epochs.csv`` (mean breakdown
    per epoch) and ``model.fqsl`` to ``out_dir`` when it is given.
    """
    tc = cfg.train
    index = index or DatasetIndex.scan(cfg.data.root)
    model = Model(cfg.model)
    aug = {"hflip": tc.hflip, "crop": tc.crop, "rotate": tc.rotate}
    aug = aug if any(aug.values()) else None
    loader = Loader(index, cfg.model.input_size, tc.batch_size, seed=tc.seed, aug=aug, threads=threads)
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        step_log = open(out / "loss.csv", "w", newline="")
        writer = csv.DictWriter(step_log, LOG_FIELDS, extrasaction="ignore")
        writer.writeheader()
    result = TrainResult(model, 0)
    epoch_rows = []
    try:
        for epoch in range(tc.epochs):
            lr = step_decay(tc.lr, epoch, tc.epochs, tc.lr_segments)
            seen = []
            for batch in loader.batches(epoch):
                if max_steps is not None and result.steps >= max_steps:
                    break
                result.steps += 1
                br = train_step(model, batch, cfg.loss, lr, result.steps)
                row = {"epoch": epoch, "step": result.steps, "lr": lr, **br}
                result.history.append(row)
                seen.append(br)
                if out:
                    writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
                if log:
                    log(f"epoch {epoch} step {result.steps} lr {lr:.3g} loss {br['total']:.5f}")
            if seen:
                epoch_rows.append({"epoch": epoch, **{k: float(np.mean([b[k] for b in seen])) for k in seen[0]}})
            if max_steps is not None and result.steps >= max_steps:
                break
    finally:
        if out:
            step_log.close()
    if out:
        with open(out / "epochs.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, ["epoch", "total", "L_S", "L_D", "L_E", "L_CFL"], extrasaction="ignore")
            w.writeheader()
            w.writerows(epoch_rows)
        result.checkpoint = out / "model.fqsl"
        checkpoint.save(result.checkpoint, cfg, model)
    return result
