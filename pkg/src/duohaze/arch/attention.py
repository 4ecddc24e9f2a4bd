"""Attention and residual building blocks shared by both branches."""

import torch
import torch.nn as nn


class CALayer(nn.Module):
    """Channel attention: global average pooling into a two-layer
    bottleneck with a sigmoid gate, scaling each channel by a weight in
    [0, 1]."""

    def __init__(self, channels, reduction=16):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.avg_pool = nn.AdaptiveAvgPool2d(1)
        self.gate = nn.Sequential(
            nn.Conv2d(channels, hidden, kernel_size=1, bias=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, channels, kernel_size=1, bias=True),
            nn.Sigmoid(),
        )
        # narrow bottlenecks can start with every ReLU unit dead, which
        # cuts gradient flow through the gate; bias the first conv up
        nn.init.constant_(self.gate[0].bias, 0.1)

    def forward(self, x):
        return x * self.gate(self.avg_pool(x))


class PALayer(nn.Module):
    """Pixel attention: per-position gate in [0, 1] from a 1x1 bottleneck."""

    def __init__(self, channels, reduction=8):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.gate = nn.Sequential(
            nn.Conv2d(channels, hidden, kernel_size=1, bias=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(hidden, 1, kernel_size=1, bias=True),
            nn.Sigmoid(),
        )
        nn.init.constant_(self.gate[0].bias, 0.1)

    def forward(self, x):
        return x * self.gate(x)


class RCAB(nn.Module):
    """Residual channel attention block: conv-relu-conv gated by channel
    attention, added back to the input. Zeroing the residual-path convs
    makes the block the identity map."""

    def __init__(self, channels, reduction=16, kernel_size=3):
        super().__init__()
        pad = kernel_size // 2
        self.body = nn.Sequential(
            nn.Conv2d(channels, channels, kernel_size, padding=pad, bias=True),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, kernel_size, padding=pad, bias=True),
            CALayer(channels, reduction),
        )

    def forward(self, x):
        return x + self.body(x)


class FeatureAttentionBlock(nn.Module):
    """Conv-relu-conv residual block gated by channel then pixel attention."""

    def __init__(self, channels, reduction=16):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True)
        self.conv2 = nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True)
        self.relu = nn.ReLU(inplace=True)
        self.ca = CALayer(channels, reduction)
        self.pa = PALayer(channels)

    def forward(self, x):
        res = self.conv2(self.relu(self.conv1(x)))
        res = self.pa(self.ca(res))
        return x + res


class EnhancingBlock(nn.Module):
    """Multi-scale context mixer placed before the branch output.

    Two parallel average-pooling paths (factors 2 and 4) are reduced by
    1x1 convs, upsampled back and fused with the identity path."""

    def __init__(self, channels):
        super().__init__()
        hidden = max(1, channels // 4)
        self.conv_in = nn.Sequential(
            nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True),
            nn.ReLU(inplace=True),
        )
        self.path2 = nn.Sequential(
            nn.AvgPool2d(kernel_size=2, stride=2),
            nn.Conv2d(channels, hidden, kernel_size=1, bias=True),
            nn.ReLU(inplace=True),
        )
        self.path4 = nn.Sequential(
            nn.AvgPool2d(kernel_size=4, stride=4),
            nn.Conv2d(channels, hidden, kernel_size=1, bias=True),
            nn.ReLU(inplace=True),
        )
        self.fuse = nn.Conv2d(channels + 2 * hidden, channels, kernel_size=3, padding=1, bias=True)

    def forward(self, x):
        x = self.conv_in(x)
        h, w = x.shape[-2:]
        p2 = nn.functional.interpolate(self.path2(x), size=(h, w), mode="bilinear", align_corners=False)
        p4 = nn.functional.interpolate(self.path4(x), size=(h, w), mode="bilinear", align_corners=False)
        return self.fuse(torch.cat([x, p2, p4], dim=1))
