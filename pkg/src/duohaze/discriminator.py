"""Patch discriminator for the adversarial term.

The image-translation design with a 70x70 receptive field: C64-C128-C256
at stride 2, C512 at stride 1, then a 1-channel score head. Outputs are
raw logits over a patch grid (``output_mode == "logits"``); the loss
functions apply the numerically stable -log sigmoid.
"""

import torch.nn as nn


class PatchDiscriminator(nn.Module):
    """Convolutional real/fake classifier over overlapping patches."""

    output_mode = "logits"

    def __init__(self, in_channels=3, base_width=64, num_stride2=3, use_norm=True):
        super().__init__()
        layers = [
            nn.Conv2d(in_channels, base_width, kernel_size=4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        width = base_width
        # instance norm removes the per-channel mean, so a bias on the
        # conv it follows would receive identically-zero gradient
        bias = not use_norm
        for i in range(1, num_stride2):
            out = width * 2
            layers.append(nn.Conv2d(width, out, kernel_size=4, stride=2, padding=1, bias=bias))
            if use_norm:
                layers.append(nn.InstanceNorm2d(out))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            width = out
        out = width * 2
        layers.append(nn.Conv2d(width, out, kernel_size=4, stride=1, padding=1, bias=bias))
        if use_norm:
            layers.append(nn.InstanceNorm2d(out))
        layers.append(nn.LeakyReLU(0.2, inplace=True))
        layers.append(nn.Conv2d(out, 1, kernel_size=4, stride=1, padding=1))
        self.model = nn.Sequential(*layers)

    def forward(self, x):
        return self.model(x)
