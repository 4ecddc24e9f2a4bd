"""Fusion tail: maps concatenated branch features to the output image.

The default is deliberately light, a single convolution followed by
tanh; the heavier variants exist only for the depth study and are known
to degrade generalization.
"""

import torch
import torch.nn as nn

from ..errors import DimensionError

FUSION_TAIL_VARIANTS = ("single_conv_tanh", "three_convs", "three_residual_blocks")


class _ResBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True),
        )

    def forward(self, x):
        return x + self.body(x)


class FusionTail(nn.Module):
    """Concatenate branch features, map to 3 channels, tanh, then affine
    (-1, 1) -> (0, 1) so outputs are strictly inside the image range."""

    def __init__(self, in_channels, variant="single_conv_tanh", hidden=64):
        super().__init__()
        if variant not in FUSION_TAIL_VARIANTS:
            raise ValueError(f"unknown fusion tail variant {variant!r}, expected one of {FUSION_TAIL_VARIANTS}")
        self.variant = variant
        if variant == "single_conv_tanh":
            self.body = nn.Conv2d(in_channels, 3, kernel_size=3, padding=1, bias=True)
        elif variant == "three_convs":
            self.body = nn.Sequential(
                nn.Conv2d(in_channels, hidden, kernel_size=3, padding=1, bias=True),
                nn.ReLU(inplace=True),
                nn.Conv2d(hidden, hidden, kernel_size=3, padding=1, bias=True),
                nn.ReLU(inplace=True),
                nn.Conv2d(hidden, 3, kernel_size=3, padding=1, bias=True),
            )
        else:
            self.body = nn.Sequential(
                nn.Conv2d(in_channels, hidden, kernel_size=3, padding=1, bias=True),
                _ResBlock(hidden),
                _ResBlock(hidden),
                _ResBlock(hidden),
                nn.Conv2d(hidden, 3, kernel_size=3, padding=1, bias=True),
            )
        self.tanh = nn.Tanh()

    def forward(self, *features):
        if len(features) > 1:
            base = features[0].shape[-2:]
            for f in features[1:]:
                if f.shape[-2:] != base:
                    raise DimensionError(
                        f"fusion inputs disagree spatially: {tuple(base)} vs {tuple(f.shape[-2:])}"
                    )
            x = torch.cat(features, dim=1)
        else:
            x = features[0]
        return (self.tanh(self.body(x)) + 1.0) * 0.5
