"""Feature-space supervision through a frozen VGG-16.

The extractor taps pre-activation feature maps from the VGG-16 stack
(defaults: conv1_2, conv2_2, conv3_3 outputs at indices 2, 7, 14) and
the loss averages, over the tapped layers, the squared L2 distance
normalized by each layer's C*H*W.

Published ImageNet weights are consumed from a local checkpoint file
(``weights_path``). Without one, the extractor falls back to a
deterministic seeded initialization: still a fixed feature projection
that yields a valid training signal, but not ImageNet features. Inputs
are expected in [0, 1]; ImageNet mean/std normalization happens inside.
"""

import torch
import torch.nn as nn
from torchvision.models import vgg16

from .errors import ConfigError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

DEFAULT_LAYER_IDS = (2, 7, 14)


class PerceptualConfig:
    """Which VGG-16 feature maps to compare."""

    def __init__(self, feature_layer_ids=DEFAULT_LAYER_IDS, weights_path=None, init_seed=0):
        ids = tuple(feature_layer_ids)
        if not ids:
            raise ConfigError("feature_layer_ids must not be empty")
        if any(i < 0 or i > 30 for i in ids):
            raise ConfigError(f"layer ids {ids} outside the VGG-16 feature range [0, 30]")
        self.feature_layer_ids = ids
        self.weights_path = weights_path
        self.init_seed = init_seed


def _seeded_init(module, seed):
    """Deterministic stand-in initialization when no checkpoint is available."""
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            std = (2.0 / fan_in) ** 0.5
            with torch.no_grad():
                m.weight.copy_(torch.randn(m.weight.shape, generator=gen) * std)
                if m.bias is not None:
                    m.bias.zero_()


class VggFeatureExtractor(nn.Module):
    """Frozen VGG-16 prefix with hooks at the configured tap layers."""

    def __init__(self, cfg=None):
        super().__init__()
        cfg = cfg or PerceptualConfig()
        self.layer_ids = cfg.feature_layer_ids
        model = vgg16(weights=None)
        if cfg.weights_path is not None:
            state = torch.load(cfg.weights_path, map_location="cpu", weights_only=True)
            model.load_state_dict(state)
            self.pretrained = True
        else:
            _seeded_init(model, cfg.init_seed)
            self.pretrained = False
        cutoff = max(self.layer_ids) + 1
        self.features = model.features[:cutoff]
        for p in self.features.parameters():
            p.requires_grad_(False)
        self.eval()
        mean = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
        std = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)
        self.register_buffer("mean", mean)
        self.register_buffer("std", std)

    def train(self, mode=True):
        # frozen extractor stays in eval mode regardless of the parent model
        return super().train(False)

    def forward(self, x):
        if x.dim() == 3:
            x = x.unsqueeze(0)
        x = x.to(self.mean.dtype)
        x = (x - self.mean) / self.std
        taps = []
        for i, layer in enumerate(self.features):
            x = layer(x)
            if i in self.layer_ids:
                taps.append(x)
        return taps


def feature_distance(fa, fb):
    """Squared L2 between two feature maps, normalized by C*H*W.

    Equals the mean squared difference, so it is invariant to spatial
    upsampling of an identical-content difference pattern.
    """
    if fa.shape != fb.shape:
        raise ValueError(f"feature shape mismatch: {tuple(fa.shape)} vs {tuple(fb.shape)}")
    return ((fa - fb) ** 2).mean()


def perceptual_loss(pred, gt, extractor):
    """Mean over tapped layers of the normalized squared feature distance."""
    taps_pred = extractor(pred)
    taps_gt = extractor(gt)
    terms = [feature_distance(a, b) for a, b in zip(taps_pred, taps_gt)]
    return sum(terms) / len(terms)


class PerceptualLoss(nn.Module):
    """Bundles the extractor with the loss for convenient reuse."""

    def __init__(self, cfg=None):
        super().__init__()
        self.extractor = VggFeatureExtractor(cfg)

    @property
    def pretrained(self):
        return self.extractor.pretrained

    def loss(self, pred, gt):
        return perceptual_loss(pred, gt, self.extractor)

    def forward(self, pred, gt):
        return self.loss(pred, gt)
