"""Current-data-fitting branch: full resolution end to end.

A head convolution, a chain of residual channel attention blocks closed
by a long skip connection, and a tail convolution. No downsampling or
upsampling anywhere, so fine detail survives at every depth.
"""

import torch.nn as nn

from .attention import RCAB


class CdfBranch(nn.Module):
    def __init__(self, num_blocks=6, channels=64, reduction=16, in_channels=3):
        super().__init__()
        if num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        self.head = nn.Conv2d(in_channels, channels, kernel_size=3, padding=1, bias=True)
        self.blocks = nn.Sequential(*[RCAB(channels, reduction) for _ in range(num_blocks)])
        self.body_end = nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True)
        self.tail = nn.Conv2d(channels, channels, kernel_size=3, padding=1, bias=True)
        self.out_channels = channels

    def forward(self, x):
        shallow = self.head(x)
        deep = self.body_end(self.blocks(shallow))
        return self.tail(shallow + deep)
