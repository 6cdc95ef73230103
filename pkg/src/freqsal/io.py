"""Binary PGM/PPM images and the checkpoint file format.

Checkpoint layout (all integers little-endian u32, floats little-endian
f64)::

    b"FQSL" | version | len(config) | config text (utf-8)
    | param count | per param: len(name) | name | rank | extents... | data
"""

import struct
from pathlib import Path

import numpy as np

MAGIC = b"FQSL"
VERSION = 1


class FormatError(ValueError):
    pass


# ------------------------------------------------------------------ images


def _tokens(buf, count, pos):
    # read `count` whitespace-separated header tokens, skipping comments
    out = []
    while len(out) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated header")
        out.append(buf[start:pos])
    return out, pos + 1  # exactly one whitespace byte ends the header


def read_pnm(path):
    """Read an 8-bit P5 (gray) or P6 (RGB) file as uint8, (H, W) or (H, W, 3)."""
    buf = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _tokens(buf, 4, 0)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported magic {magic!r}")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise FormatError(f"{path}: only 8-bit images are supported (maxval {maxval})")
    depth = 3 if magic == b"P6" else 1
    n = w * h * depth
    data = np.frombuffer(buf, dtype=np.uint8, count=n, offset=pos) if len(buf) - pos >= n else None
    if data is None:
        raise FormatError(f"{path}: expected {n} pixel bytes, found {len(buf) - pos}")
    return data.reshape((h, w, 3) if depth == 3 else (h, w)).copy()


def write_pnm(path, img):
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise TypeError(f"expected uint8 pixels, got {img.dtype}")
    if img.ndim == 2:
        magic = b"P5"
    elif img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    else:
        raise ValueError(f"cannot store an image of shape {img.shape}")
    h, w = img.shape[:2]
    Path(path).write_bytes(magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(img).tobytes())


def to_uint8(x):
    """Quantise values in [0, 1] to 8 bits (round half up, clipped)."""
    return np.floor(np.clip(np.asarray(x, dtype=float), 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def load_gray(path):
    return read_pnm(path).astype(float) / 255.0


def load_rgb(path):
    """RGB image as a float (3, H, W) array; gray files are replicated."""
    img = read_pnm(path).astype(float) / 255.0
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    return np.ascontiguousarray(img.transpose(2, 0, 1))


def save_gray(path, x):
    write_pnm(path, to_uint8(x))


def save_rgb(path, x):
    write_pnm(path, to_uint8(np.asarray(x).transpose(1, 2, 0)))


# ------------------------------------------------------------------ checkpoints


def _u32(*vals):
    return struct.pack(f"<{len(vals)}I", *vals)


def save_checkpoint(path, config_text, params):
    """``params`` is an iterable of (name, float array) in a fixed order."""
    chunks = [MAGIC, _u32(VERSION)]
    text = config_text.encode("utf-8")
    chunks += [_u32(len(text)), text]
    params = list(params)
    chunks.append(_u32(len(params)))
    for name, arr in params:
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        chunks += [_u32(len(raw)), raw, _u32(arr.ndim, *arr.shape), arr.tobytes()]
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.path}: truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, count=1):
        vals = struct.unpack(f"<{count}I", self.take(4 * count))
        return vals if count > 1 else vals[0]


def load_checkpoint(path):
    """Returns (config text, dict name -> array), insertion-ordered."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != MAGIC:
        raise FormatError(f"{path}: not a checkpoint")
    version = r.u32()
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    config_text = r.take(r.u32()).decode("utf-8")
    params = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        shape = tuple(np.atleast_1d(r.u32(rank))) if rank else ()
        n = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(r.take(8 * n), dtype="<f8").astype(float).reshape(shape)
    if r.pos != len(r.buf):
        raise FormatError(f"{path}: {len(r.buf) - r.pos} trailing bytes")
    return config_text, params
