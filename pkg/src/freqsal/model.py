"""End-to-end network: dual spectral encoder, four fusions, edge branch,
attention decoder and the prediction heads."""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import nn
from .feb import FebWeights, edge_features
from .frcab import FrcabWeights, frcab
from .mpa import NUM_FILTERS, DynamicFilterBank, MpaWeights, filter_from_context, mpa
from .spectral import irfft2_spatial, rfft2_spatial
from .tensor import ShapeError, Tensor, concat_channels

STEM_STRIDE = 4


@dataclass
class ModelConfig:
    input_size: int = 64
    stage_channels: tuple = (16, 32, 64, 128)
    stage_depths: tuple = (1, 1, 1, 1)
    filters: int = NUM_FILTERS
    edge_channels: int = 16
    seed: int = 0

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.stage_depths = tuple(int(d) for d in self.stage_depths)
        if len(self.stage_channels) != 4 or len(self.stage_depths) != 4:
            raise ValueError("exactly four encoder stages are supported")
        if self.input_size % 32:
            raise ValueError(f"input_size must be divisible by 32, got {self.input_size}")

    def stage_sizes(self):
        return [self.input_size // (STEM_STRIDE * 2**i) for i in range(4)]

    def to_dict(self):
        return asdict(self)


@dataclass
class SaliencyBundle:
    S: Tensor
    E_pred: Tensor
    side: list  # four decoder predictions at full resolution, probabilities
    co_r: Tensor  # RGB co-director map (real, full resolution)
    co_t: Tensor
    d: list
    e3: Tensor
    features: dict = field(default_factory=dict)


# ------------------------------------------------------------------ encoder


@dataclass
class MixerBlock:
    norm1: nn.Norm
    lift: nn.Conv1
    act: nn.StarRelu
    bank: DynamicFilterBank
    proj: nn.Conv1
    norm2: nn.Norm
    ffn: nn.DConv3

    @classmethod
    def init(cls, store, name, channels, size, filters, rng):
        return cls(nn.Norm.init(store, f"{name}.norm1", channels),
                   nn.Conv1.init(store, f"{name}.lift", channels, channels, rng),
                   nn.StarRelu.init(store, f"{name}.act"),
                   DynamicFilterBank.init(store, f"{name}.df", channels, (size, size), rng, filters),
                   nn.Conv1.init(store, f"{name}.proj", channels, channels, rng),
                   nn.Norm.init(store, f"{name}.norm2", channels),
                   nn.DConv3.init(store, f"{name}.ffn", channels, channels, rng))


def spectral_mix(y, block):
    """Token mixing by a dynamic global filter in the Fourier domain."""
    u = nn.star_relu(nn.conv1x1(y, block.lift), block.act)
    spec = rfft2_spatial(u) * filter_from_context(y, block.bank)
    return nn.conv1x1(irfft2_spatial(spec, y.shape[-1]), block.proj)


def mixer_block(x, block):
    x = x + spectral_mix(nn.layer_norm(x, block.norm1), block)
    return x + nn.dwconv3(nn.layer_norm(x, block.norm2), block.ffn)


@dataclass
class Encoder:
    stem: nn.PatchConv
    downs: list
    stages: list

    @classmethod
    def init(cls, store, name, cfg, rng):
        ch, sizes = cfg.stage_channels, cfg.stage_sizes()
        stem = nn.PatchConv.init(store, f"{name}.stem", 3, ch[0], STEM_STRIDE, rng)
        downs = [nn.PatchConv.init(store, f"{name}.down{i}", ch[i - 1], ch[i], 2, rng) for i in range(1, 4)]
        stages = [[MixerBlock.init(store, f"{name}.s{i}.b{j}", ch[i], sizes[i], cfg.filters, rng)
                   for j in range(cfg.stage_depths[i])] for i in range(4)]
        return cls(stem, downs, stages)


def run_encoder(x, enc):
    feats = []
    x = nn.patch_conv(x, enc.stem)
    for i, blocks in enumerate(enc.stages):
        if i:
            x = nn.patch_conv(x, enc.downs[i - 1])
        for block in blocks:
            x = mixer_block(x, block)
        feats.append(x)
    return feats


# ------------------------------------------------------------------ network


@dataclass
class Weights:
    rgb: Encoder
    thermal: Encoder
    fusion: list
    edge: FebWeights
    decoder: list  # FRCAB for d4, d3, d2, d1
    head: nn.Dnru
    head_out: nn.Conv1
    side: list  # DConv3 -> 1 channel for d1..d4
    edge_head: nn.DConv3
    co_r: nn.DConv3
    co_t: nn.DConv3

    @classmethod
    def init(cls, store, cfg):
        rng = np.random.default_rng(cfg.seed)
        c1, c2, c3, c4 = cfg.stage_channels
        sizes = cfg.stage_sizes()
        ce = cfg.edge_channels
        return cls(
            rgb=Encoder.init(store, "enc_rgb", cfg, rng),
            thermal=Encoder.init(store, "enc_thermal", cfg, rng),
            fusion=[MpaWeights.init(store, f"mpa{i + 1}", c, (s, s), rng, cfg.filters)
                    for i, (c, s) in enumerate(zip(cfg.stage_channels, sizes))],
            edge=FebWeights.init(store, "feb", (c1, c2), [(sizes[0],) * 2, (sizes[1],) * 2], ce, rng),
            decoder=[FrcabWeights.init(store, "dec4", c4, c3, rng),
                     FrcabWeights.init(store, "dec3", 2 * c3, c2, rng),
                     FrcabWeights.init(store, "dec2", 2 * c2 + c3, c1, rng),
                     FrcabWeights.init(store, "dec1", 2 * c1 + c2 + c3, c1, rng)],
            head=nn.Dnru.init(store, "head", c1 + ce, c1, rng),
            head_out=nn.Conv1.init(store, "head_out", c1, 1, rng),
            side=[nn.DConv3.init(store, f"side{i}", c, 1, rng) for i, c in enumerate((c1, c1, c2, c3), 1)],
            edge_head=nn.DConv3.init(store, "edge_head", ce, 1, rng),
            co_r=nn.DConv3.init(store, "co_r", c1, 1, rng),
            co_t=nn.DConv3.init(store, "co_t", c1, 1, rng),
        )


def _as_input(x, size, name):
    x = x if isinstance(x, Tensor) else Tensor(x)
    if x.shape[-2:] != (size, size):
        raise ShapeError(f"{name} must be {size}x{size}, got {x.shape[-2:]}")
    if x.shape[-3] == 1:
        x = concat_channels([x, x, x])
    if x.shape[-3] != 3:
        raise ShapeError(f"{name} needs 1 or 3 channels, got {x.shape[-3]}")
    return x


def encode(rgb, thermal, w, cfg):
    """Features at strides 4, 8, 16, 32 for each modality."""
    rgb = _as_input(rgb, cfg.input_size, "rgb")
    thermal = _as_input(thermal, cfg.input_size, "thermal")
    return run_encoder(rgb, w.rgb), run_encoder(thermal, w.thermal)


def decode(fused, e3, w):
    """Pyramid decoder; returns (d1..d4, saliency logits)."""
    f1, f2, f3, f4 = fused
    d4 = frcab(f4, w.decoder[0])
    d3 = frcab(concat_channels([f3, d4]), w.decoder[1])
    d2 = frcab(concat_channels([f2, d3, nn.upsample(d4, 2)]), w.decoder[2])
    d1 = frcab(concat_channels([f1, d2, nn.upsample(d3, 2), nn.upsample(d4, 4)]), w.decoder[3])
    # d1 sits at half resolution and e3 at full, so d1 is lifted before the merge
    merged = nn.dnru(concat_channels([nn.upsample(d1, 2), e3]), w.head, up=1)
    return [d1, d2, d3, d4], nn.conv1x1(merged, w.head_out)


def forward(rgb, thermal, w, cfg):
    r, t = encode(rgb, thermal, w, cfg)
    fused = [mpa(ri, ti, wi) for ri, ti, wi in zip(r, t, w.fusion)]
    e1, e2, e3 = edge_features(t[0], fused[0], t[1], fused[1], w.edge)
    d, logits = decode(fused, e3, w)
    full = cfg.input_size
    side = []
    for i, di in enumerate(d):
        factor = full // di.shape[-1]
        side.append(nn.sigmoid(nn.upsample(nn.dwconv3(di, w.side[i]), factor)))
    features = {f"r{i + 1}": x for i, x in enumerate(r)}
    features.update({f"t{i + 1}": x for i, x in enumerate(t)})
    features.update({f"f{i + 1}": x for i, x in enumerate(fused)})
    features.update({f"d{i + 1}": x for i, x in enumerate(d)})
    features.update(e1=e1, e2=e2, e3=e3)
    return SaliencyBundle(
        S=nn.sigmoid(logits),
        E_pred=nn.sigmoid(nn.dwconv3(e3, w.edge_head)),
        side=side,
        co_r=nn.upsample(nn.dwconv3(r[0], w.co_r), 4),
        co_t=nn.upsample(nn.dwconv3(t[0], w.co_t), 4),
        d=d,
        e3=e3,
        features=features,
    )


class Model:
    """Config, parameter store and weight tree bundled together."""

    def __init__(self, cfg=None):
        self.cfg = cfg or ModelConfig()
        self.store = nn.ParamStore()
        self.weights = Weights.init(self.store, self.cfg)

    def __call__(self, rgb, thermal):
        return forward(rgb, thermal, self.weights, self.cfg)
