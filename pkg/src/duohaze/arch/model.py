"""Two-branch dehazing model: configuration, assembly, forward policy,
parameter loading and counting."""

from dataclasses import dataclass, field, asdict

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ConfigError, DimensionError, WeightLoadError
from .cdf import CdfBranch
from .decoder import TransferBranch
from .fusion import FUSION_TAIL_VARIANTS, FusionTail

# Deepest encoder stride; inputs to the transfer branch must be a
# multiple of this (the padding policy takes care of the rest).
ENCODER_STRIDE = 16


@dataclass
class ModelConfig:
    """Architecture hyperparameters left open by the two-branch design."""

    encoder_variant: str = "res2net50_26w4s"
    decoder_channels: tuple = (512, 256, 128, 64)
    cdf_num_blocks: int = 6
    cdf_channels: int = 64
    cdf_reduction: int = 16
    fusion_tail_variant: str = "single_conv_tanh"
    enable_tl_branch: bool = True
    enable_cdf_branch: bool = True
    pad_to_multiple: bool = True

    def __post_init__(self):
        if self.cdf_num_blocks < 1:
            raise ConfigError("cdf_num_blocks must be >= 1")
        if self.cdf_channels < 8:
            raise ConfigError("cdf_channels must be >= 8")
        if self.fusion_tail_variant not in FUSION_TAIL_VARIANTS:
            raise ConfigError(f"unknown fusion_tail_variant {self.fusion_tail_variant!r}")
        if not (self.enable_tl_branch or self.enable_cdf_branch):
            raise ConfigError("at least one branch must be enabled")
        self.decoder_channels = tuple(self.decoder_channels)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def tiny_model_config(**overrides):
    """Desk-scale config used by tests and the scaled-down presets."""
    base = dict(
        encoder_variant="res2net_tiny",
        decoder_channels=(64, 48, 32, 24),
        cdf_num_blocks=3,
        cdf_channels=24,
        cdf_reduction=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


def pad_to_stride(x, stride=ENCODER_STRIDE):
    """Pad bottom/right so H and W are multiples of ``stride``.

    Reflect padding, falling back to replicate when the image is smaller
    than the pad it needs. Returns (padded, (h, w)) with the original
    spatial size for cropping back.
    """
    h, w = x.shape[-2:]
    ph = (stride - h % stride) % stride
    pw = (stride - w % stride) % stride
    if ph == 0 and pw == 0:
        return x, (h, w)
    mode = "reflect" if (ph < h and pw < w) else "replicate"
    return F.pad(x, (0, pw, 0, ph), mode=mode), (h, w)


class TwoBranchDehazer(nn.Module):
    """Ensemble of the transfer branch and the full-resolution branch,
    combined by a learnable fusion tail.

    Both enabled branches see the same (possibly padded) input; their
    full-resolution features are concatenated and mapped to a [0, 1]
    image, which is cropped back to the input size.
    """

    def __init__(self, config=None):
        super().__init__()
        self.config = config or ModelConfig()
        cfg = self.config
        fusion_in = 0
        self.tl = None
        self.cdf = None
        if cfg.enable_tl_branch:
            self.tl = TransferBranch(cfg.encoder_variant, cfg.decoder_channels)
            fusion_in += self.tl.out_channels
        if cfg.enable_cdf_branch:
            self.cdf = CdfBranch(cfg.cdf_num_blocks, cfg.cdf_channels, cfg.cdf_reduction)
            fusion_in += self.cdf.out_channels
        self.fusion = FusionTail(fusion_in, cfg.fusion_tail_variant)

    def _prepare(self, image):
        if image.dim() == 3:
            image = image.unsqueeze(0)
        if image.dim() != 4 or image.shape[1] != 3:
            raise DimensionError(f"expected B x 3 x H x W input, got {tuple(image.shape)}")
        h, w = image.shape[-2:]
        if h < 1 or w < 1:
            raise DimensionError("input has zero spatial extent")
        if self.tl is None:
            return image, (h, w)
        if not self.config.pad_to_multiple:
            if h % ENCODER_STRIDE or w % ENCODER_STRIDE:
                raise DimensionError(
                    f"input {h}x{w} not divisible by {ENCODER_STRIDE} and padding is disabled"
                )
            return image, (h, w)
        return pad_to_stride(image)

    def transfer_branch_forward(self, image):
        """Full-resolution transfer-branch features, cropped to the input size."""
        if self.tl is None:
            raise ConfigError("transfer branch is disabled in this config")
        x, (h, w) = self._prepare(image)
        return self.tl(x)[:, :, :h, :w]

    def cdf_branch_forward(self, image):
        """Full-resolution CDF features; never padded or resampled."""
        if self.cdf is None:
            raise ConfigError("CDF branch is disabled in this config")
        if image.dim() == 3:
            image = image.unsqueeze(0)
        h, w = image.shape[-2:]
        if h < 1 or w < 1:
            raise DimensionError("input has zero spatial extent")
        return self.cdf(image)

    def forward(self, image):
        x, (h, w) = self._prepare(image)
        feats = []
        if self.tl is not None:
            feats.append(self.tl(x))
        if self.cdf is not None:
            feats.append(self.cdf(x))
        out = self.fusion(*feats)
        return out[:, :, :h, :w]


def count_parameters(model):
    """Exact count of learnable scalars (trainable parameters only)."""
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


@dataclass
class LoadReport:
    """Outcome of loading a parameter store into the encoder."""

    loaded: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (key, reason) pairs

    @property
    def num_loaded(self):
        return len(self.loaded)

    def summary(self):
        return f"loaded {len(self.loaded)} keys, skipped {len(self.skipped)}"


def load_pretrained_encoder(model, store, strict=False):
    """Copy backbone weights from ``store`` into the truncated encoder.

    ``store`` maps backbone-level paths (conv1.weight, layer1.0...) to
    tensors, exactly the layout of published classification checkpoints.
    Keys beyond the truncation point (layer4, fc, ...) are skipped; with
    ``strict=True`` every encoder key must be present with a matching
    shape or WeightLoadError names the first offender. Only the encoder
    is touched: decoder, CDF branch and fusion tail keep their values.
    """
    if getattr(model, "tl", None) is None:
        raise ConfigError("model has no transfer branch to load encoder weights into")
    encoder = model.tl.encoder
    own = encoder.state_dict()
    report = LoadReport()
    to_load = {}
    for key, tensor in own.items():
        if key not in store:
            if strict:
                raise WeightLoadError(f"encoder key {key!r} missing from parameter store")
            report.skipped.append((key, "missing from store"))
            continue
        src = store[key]
        if tuple(src.shape) != tuple(tensor.shape):
            if strict:
                raise WeightLoadError(
                    f"shape mismatch for key {key!r}: store {tuple(src.shape)} "
                    f"vs encoder {tuple(tensor.shape)}"
                )
            report.skipped.append((key, f"shape mismatch {tuple(src.shape)}"))
            continue
        to_load[key] = src
        report.loaded.append(key)
    for key in store:
        if key not in own:
            report.skipped.append((key, "beyond truncation point"))
    merged = dict(own)
    merged.update({k: torch.as_tensor(v) for k, v in to_load.items()})
    encoder.load_state_dict(merged)
    return report


def save_parameter_store(path, store):
    torch.save(dict(store), path)


def load_parameter_store(path):
    return torch.load(path, map_location="cpu", weights_only=True)
