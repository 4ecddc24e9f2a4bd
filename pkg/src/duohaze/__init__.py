"""Two-branch ensemble dehazing: a pretrained-encoder transfer branch, a
full-resolution residual channel attention branch, and a learnable
fusion tail, plus the four-term training objective, synthetic haze
generation and an evaluation/ablation harness."""

__version__ = "0.1.0"

from . import arch, data, eval, haze, losses, perceptual, train  # noqa: F401,E402
from .arch import ModelConfig, TwoBranchDehazer, count_parameters  # noqa: F401
from .losses import LossWeights, SsimConfig  # noqa: F401
from .train import TrainConfig  # noqa: F401
