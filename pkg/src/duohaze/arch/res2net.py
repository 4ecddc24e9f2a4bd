"""Res2Net-style encoder, truncated after the stride-16 stage.

Only the front of the backbone is used: stem, layer1 (stride 4 after the
max pool), layer2 (stride 8) and layer3 (stride 16). layer4, pooling and
the fully connected head are dropped, so the deepest feature is 1/16 of
the input resolution. Module names (conv1, bn1, layer{1,2,3}.{i}.convs.{j}
and so on) follow the published res2net checkpoints, which lets ImageNet
state dicts load directly; layer4/fc entries in such files are reported
as skipped.
"""

import math

import torch
import torch.nn as nn


class Bottle2neck(nn.Module):
    """Bottleneck with hierarchical residual-like splits inside."""

    expansion = 4

    def __init__(self, inplanes, planes, stride=1, downsample=None, base_width=26, scale=4, stype="normal"):
        super().__init__()
        width = int(math.floor(planes * (base_width / 64.0)))
        self.conv1 = nn.Conv2d(inplanes, width * scale, kernel_size=1, bias=False)
        self.bn1 = nn.BatchNorm2d(width * scale)
        self.nums = 1 if scale == 1 else scale - 1
        if stype == "stage":
            self.pool = nn.AvgPool2d(kernel_size=3, stride=stride, padding=1)
        self.convs = nn.ModuleList(
            nn.Conv2d(width, width, kernel_size=3, stride=stride, padding=1, bias=False)
            for _ in range(self.nums)
        )
        self.bns = nn.ModuleList(nn.BatchNorm2d(width) for _ in range(self.nums))
        self.conv3 = nn.Conv2d(width * scale, planes * self.expansion, kernel_size=1, bias=False)
        self.bn3 = nn.BatchNorm2d(planes * self.expansion)
        self.relu = nn.ReLU(inplace=True)
        self.downsample = downsample
        self.stype = stype
        self.scale = scale
        self.width = width

    def forward(self, x):
        residual = x
        out = self.relu(self.bn1(self.conv1(x)))
        spx = torch.split(out, self.width, 1)
        sp = None
        pieces = []
        for i in range(self.nums):
            sp = spx[i] if (i == 0 or self.stype == "stage") else sp + spx[i]
            sp = self.relu(self.bns[i](self.convs[i](sp)))
            pieces.append(sp)
        if self.scale != 1:
            last = spx[self.nums]
            pieces.append(self.pool(last) if self.stype == "stage" else last)
        out = torch.cat(pieces, dim=1)
        out = self.bn3(self.conv3(out))
        if self.downsample is not None:
            residual = self.downsample(x)
        return self.relu(out + residual)


class Res2NetEncoder(nn.Module):
    """Truncated Res2Net returning per-stage features.

    forward gives (stem, c2, c3, c4): stride 2 (pre-pool stem output),
    stride 4, stride 8 and stride 16 feature maps.
    """

    def __init__(self, layers=(3, 4, 6), planes=(64, 128, 256), stem_width=64, base_width=26, scale=4):
        super().__init__()
        self.inplanes = stem_width
        self.base_width = base_width
        self.scale = scale
        self.conv1 = nn.Conv2d(3, stem_width, kernel_size=7, stride=2, padding=3, bias=False)
        self.bn1 = nn.BatchNorm2d(stem_width)
        self.relu = nn.ReLU(inplace=True)
        self.maxpool = nn.MaxPool2d(kernel_size=3, stride=2, padding=1)
        self.layer1 = self._make_layer(planes[0], layers[0])
        self.layer2 = self._make_layer(planes[1], layers[1], stride=2)
        self.layer3 = self._make_layer(planes[2], layers[2], stride=2)
        self.stage_channels = (
            stem_width,
            planes[0] * Bottle2neck.expansion,
            planes[1] * Bottle2neck.expansion,
            planes[2] * Bottle2neck.expansion,
        )
        self.out_channels = self.stage_channels[-1]

    def _make_layer(self, planes, blocks, stride=1):
        downsample = None
        if stride != 1 or self.inplanes != planes * Bottle2neck.expansion:
            downsample = nn.Sequential(
                nn.Conv2d(self.inplanes, planes * Bottle2neck.expansion, kernel_size=1, stride=stride, bias=False),
                nn.BatchNorm2d(planes * Bottle2neck.expansion),
            )
        layers = [
            Bottle2neck(
                self.inplanes, planes, stride, downsample,
                base_width=self.base_width, scale=self.scale, stype="stage",
            )
        ]
        self.inplanes = planes * Bottle2neck.expansion
        layers.extend(
            Bottle2neck(self.inplanes, planes, base_width=self.base_width, scale=self.scale)
            for _ in range(1, blocks)
        )
        return nn.Sequential(*layers)

    def forward(self, x):
        stem = self.relu(self.bn1(self.conv1(x)))
        x = self.maxpool(stem)
        c2 = self.layer1(x)
        c3 = self.layer2(c2)
        c4 = self.layer3(c3)
        return stem, c2, c3, c4


def res2net50_26w4s_encoder():
    """Front of the 50-layer class backbone, 26w x 4s, 1024-channel output."""
    return Res2NetEncoder(layers=(3, 4, 6), planes=(64, 128, 256), stem_width=64, base_width=26, scale=4)


def res2net_tiny_encoder():
    """Slim same-shape variant for desk-scale tests and presets."""
    return Res2NetEncoder(layers=(1, 1, 1), planes=(16, 32, 64), stem_width=16, base_width=8, scale=4)


ENCODERS = {
    "res2net50_26w4s": res2net50_26w4s_encoder,
    "res2net_tiny": res2net_tiny_encoder,
}


def build_encoder(variant):
    if variant not in ENCODERS:
        raise KeyError(f"unknown encoder variant {variant!r}, available: {sorted(ENCODERS)}")
    return ENCODERS[variant]()
