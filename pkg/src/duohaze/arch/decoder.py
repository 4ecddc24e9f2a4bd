"""Transfer branch: truncated pretrained-style encoder plus a
pixel-shuffle decoder that restores full resolution."""

import torch
import torch.nn as nn

from .attention import EnhancingBlock, FeatureAttentionBlock
from .res2net import build_encoder


class PixelShuffleUp(nn.Module):
    """x2 upsampling stage: conv into 4x channels, depth-to-space,
    optional encoder-skip fusion, then feature attention."""

    def __init__(self, in_channels, out_channels, skip_channels=0):
        super().__init__()
        self.expand = nn.Conv2d(in_channels, out_channels * 4, kernel_size=3, padding=1, bias=True)
        self.shuffle = nn.PixelShuffle(2)
        self.fuse = (
            nn.Conv2d(out_channels + skip_channels, out_channels, kernel_size=3, padding=1, bias=True)
            if skip_channels
            else None
        )
        self.attention = FeatureAttentionBlock(out_channels)

    def forward(self, x, skip=None):
        x = self.shuffle(self.expand(x))
        if self.fuse is not None:
            x = self.fuse(torch.cat([x, skip], dim=1))
        return self.attention(x)


class TransferBranch(nn.Module):
    """Encoder-decoder branch built on a truncated classification backbone.

    The encoder downsamples 16x; four pixel-shuffle stages bring the
    features back to input resolution, with skip connections from the
    encoder stages at matching scales (there is no full-resolution skip,
    the stem already sits at stride 2). An enhancing block conditions the
    final full-resolution features.
    """

    def __init__(self, encoder_variant="res2net50_26w4s", decoder_channels=(512, 256, 128, 64)):
        super().__init__()
        if len(decoder_channels) != 4:
            raise ValueError("decoder_channels must list 4 stage widths (16x -> 1x)")
        self.encoder = build_encoder(encoder_variant)
        stem_ch, c2_ch, c3_ch, c4_ch = self.encoder.stage_channels
        d1, d2, d3, d4 = decoder_channels
        self.up1 = PixelShuffleUp(c4_ch, d1, skip_channels=c3_ch)
        self.up2 = PixelShuffleUp(d1, d2, skip_channels=c2_ch)
        self.up3 = PixelShuffleUp(d2, d3, skip_channels=stem_ch)
        self.up4 = PixelShuffleUp(d3, d4, skip_channels=0)
        self.enhance = EnhancingBlock(d4)
        self.out_channels = d4

    def forward(self, x):
        stem, c2, c3, c4 = self.encoder(x)
        y = self.up1(c4, c3)
        y = self.up2(y, c2)
        y = self.up3(y, stem)
        y = self.up4(y)
        return self.enhance(y)
