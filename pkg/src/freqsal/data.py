"""Paired RGB-thermal datasets: directory index, synthetic generator,
augmentation and an ordered, optionally threaded batch loader.

Layout on disk::

    root/rgb/<id>.ppm   root/thermal/<id>.pgm   root/gt/<id>.pgm
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import io

THREADS_ENV = "FREQSAL_THREADS"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    ident: str
    rgb: Path
    thermal: Path
    gt: Path


@dataclass
class DatasetIndex:
    records: list
    split: str = "train"

    @classmethod
    def scan(cls, root, split="train", require_gt=True):
        """Pair files by stem. Every id must be present in all folders."""
        root = Path(root)
        folders = {"rgb": (root / "rgb", ".ppm"), "thermal": (root / "thermal", ".pgm")}
        if require_gt:
            folders["gt"] = (root / "gt", ".pgm")
        missing_dirs = [str(d) for d, _ in folders.values() if not d.is_dir()]
        if missing_dirs:
            raise DatasetError(f"missing folders: {', '.join(missing_dirs)}")
        stems = {k: {p.stem for p in d.glob(f"*{ext}")} for k, (d, ext) in folders.items()}
        ids = sorted(set().union(*stems.values()))
        problems = [f"{folders[k][0] / (i + folders[k][1])}" for i in ids for k in folders if i not in stems[k]]
        if problems:
            raise DatasetError(f"{len(problems)} missing file(s):\n  " + "\n  ".join(problems))
        if not ids:
            raise DatasetError(f"no images under {root}")
        recs = [Record(i, folders["rgb"][0] / f"{i}.ppm", folders["thermal"][0] / f"{i}.pgm",
                       root / "gt" / f"{i}.pgm") for i in ids]
        return cls(recs, split)

    def __len__(self):
        return len(self.records)


def thread_count():
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


# ------------------------------------------------------------------ synthetic


def synth_sample(rng, size=64):
    """One (rgb 3xHxW, thermal 1xHxW, gt HxW) triple in [0, 1].

    The object is a union of a few ellipses. RGB shows it with a colour
    shift over a textured background; thermal shows it warm with sensor
    noise and weaker background structure.
    """
    yy, xx = np.mgrid[0:size, 0:size] / size
    gt = np.zeros((size, size), dtype=bool)
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0.25, 0.75, 2)
        ry, rx = rng.uniform(0.08, 0.22, 2)
        th = rng.uniform(0, np.pi)
        dy, dx = yy - cy, xx - cx
        u = dx * np.cos(th) + dy * np.sin(th)
        v = -dx * np.sin(th) + dy * np.cos(th)
        gt |= (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
    g = gt.astype(float)
    texture = ndimage.gaussian_filter(rng.standard_normal((size, size)), 2.0)
    texture /= np.abs(texture).max() + 1e-12
    bg, fg = rng.uniform(0.15, 0.45, 3), rng.uniform(0.55, 0.9, 3)
    rgb = bg[:, None, None] * (1 - g) + fg[:, None, None] * g
    rgb = rgb + 0.08 * texture + 0.03 * rng.standard_normal((3, size, size))
    warm = ndimage.gaussian_filter(g, 1.0)
    thermal = 0.2 + 0.55 * warm + 0.04 * texture + 0.05 * rng.standard_normal((size, size))
    return np.clip(rgb, 0, 1), np.clip(thermal, 0, 1)[None], g


def write_synthetic(root, count, size=64, seed=0):
    """Write ``count`` synthetic triples under ``root``; returns the index."""
    root = Path(root)
    for sub in ("rgb", "thermal", "gt"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(count):
        rgb, thermal, gt = synth_sample(rng, size)
        name = f"{i:04d}"
        io.save_rgb(root / "rgb" / f"{name}.ppm", rgb)
        io.save_gray(root / "thermal" / f"{name}.pgm", thermal[0])
        io.save_gray(root / "gt" / f"{name}.pgm", gt)
    return DatasetIndex.scan(root)


# ------------------------------------------------------------------ loading


def resize(x, size, order=1):
    """Resample the last two axes to ``size x size``."""
    h, w = x.shape[-2:]
    if (h, w) == (size, size):
        return x
    zoom = [1.0] * (x.ndim - 2) + [size / h, size / w]
    return ndimage.zoom(x, zoom, order=order, mode="nearest", grid_mode=True)


def load_record(rec, size, with_gt=True):
    rgb = io.load_rgb(rec.rgb)
    thermal = io.load_gray(rec.thermal)[None]
    shapes = {rgb.shape[-2:], thermal.shape[-2:]}
    gt = None
    if with_gt:
        gt = io.load_gray(rec.gt)
        shapes.add(gt.shape)
    if len(shapes) != 1:
        raise DatasetError(f"{rec.ident}: image sizes differ {sorted(shapes)}")
    rgb, thermal = resize(rgb, size), resize(thermal, size)
    if gt is not None:
        gt = (resize(gt, size) >= 0.5).astype(float)
    return rgb, thermal, gt


def augment(rgb, thermal, gt, rng, hflip=True, crop=True, rotate=True):
    """Random horizontal flip, crop-and-resize, and rotation by 90/180/270
    degrees, applied identically to all three maps."""
    size = gt.shape[-1]
    if hflip and rng.random() < 0.5:
        rgb, thermal, gt = rgb[..., ::-1], thermal[..., ::-1], gt[..., ::-1]
    if crop and rng.random() < 0.5:
        side = int(rng.integers(int(0.75 * size), size + 1))
        y0, x0 = rng.integers(0, size - side + 1, 2)
        window = (Ellipsis, slice(y0, y0 + side), slice(x0, x0 + side))
        rgb, thermal = resize(rgb[window], size), resize(thermal[window], size)
        gt = (resize(gt[window], size) >= 0.5).astype(float)
    if rotate and rng.random() < 0.5:
        k = int(rng.integers(1, 4))
        rgb, thermal, gt = (np.rot90(a, k, axes=(-2, -1)) for a in (rgb, thermal, gt))
    return (np.ascontiguousarray(rgb), np.ascontiguousarray(thermal), np.ascontiguousarray(gt))


def sample_rng(seed, epoch, idx):
    # independent of thread scheduling: one stream per (seed, epoch, sample)
    return np.random.default_rng([seed, epoch, idx])


class Loader:
    """Yields batches in a fixed order for a given (seed, epoch).

    Samples are decoded on up to ``FREQSAL_THREADS`` worker threads;
    results are reassembled by sequence number so the batch contents do
    not depend on the thread count.
    """

    def __init__(self, index, size, batch_size, seed=0, shuffle=True, aug=None, threads=None):
        self.index = index
        self.size = size
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle
        self.aug = aug  # dict of augment() flags, or None for no augmentation
        self.threads = threads or thread_count()
        self._cache = {}

    def order(self, epoch):
        n = len(self.index)
        if not self.shuffle:
            return np.arange(n)
        return np.random.default_rng([self.seed, epoch]).permutation(n)

    def _decoded(self, idx):
        # raw decode is cached; augmentation always starts from the same pixels
        if idx not in self._cache:
            self._cache[idx] = load_record(self.index.records[idx], self.size)
        return self._cache[idx]

    def _item(self, epoch, idx):
        rgb, thermal, gt = self._decoded(idx)
        if self.aug:
            rgb, thermal, gt = augment(rgb, thermal, gt, sample_rng(self.seed, epoch, idx), **self.aug)
        return rgb, thermal, gt

    def batches(self, epoch):
        order = self.order(epoch)
        chunks = [order[i:i + self.batch_size] for i in range(0, len(order), self.batch_size)]
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            for chunk in chunks:
                # map() hands results back in submission order
                items = list(pool.map(lambda i: self._item(epoch, int(i)), chunk))
                yield (np.stack([a for a, _, _ in items]), np.stack([b for _, b, _ in items]),
                       np.stack([c for _, _, c in items])[:, None], [self.index.records[i].ident for i in chunk])
