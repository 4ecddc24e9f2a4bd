"""Named run configurations.

overfit-sanity   trainability check: memorize 2 pairs at 128x128 crops
                 with the default loss weights, early-stopping once the
                 training-set PSNR clears 30 dB. Scaled-down model so it
                 finishes on CPU; run nightly, not per-commit.
ablation-tiny    the five-preset ablation at a toy budget (finiteness
                 and schema checks only).
ablation-small   same protocol, ~1 h budget; asserts the pretraining
                 trend and therefore needs real encoder weights.
nh2021-paper-scale  full-size model and published recipe; requires
                 challenge data and a long GPU run, never CI.
"""

from dataclasses import replace

from .arch import ModelConfig, tiny_model_config
from .data import AugmentationConfig
from .errors import ConfigError
from .losses import LossWeights, SsimConfig
from .train import TrainConfig


def overfit_sanity_config(seed=7):
    return TrainConfig(
        seed=seed,
        max_steps=2000,
        batch_size=2,
        model=tiny_model_config(),
        loss_weights=LossWeights(),  # the published (1.0, 0.5, 0.01, 0.0005)
        # window 11 needs >= 11 px at the coarsest scale: 4 scales at 128
        ssim=SsimConfig.for_scales(4),
        augment=AugmentationConfig(crop_size=128),
        checkpoint_every=0,
        val_every=50,
        early_stop_psnr=30.0,
        disc_base_width=16,
    )


def paper_scale_config(seed=7):
    return TrainConfig(
        seed=seed,
        max_steps=200_000,
        batch_size=4,
        model=ModelConfig(),
        loss_weights=LossWeights(),
        ssim=SsimConfig.for_scales(5),
        augment=AugmentationConfig(crop_size=256),
        checkpoint_every=5000,
        use_pretrained_encoder=True,
    )


def training_preset(name, seed=7):
    if name == "overfit-sanity":
        return overfit_sanity_config(seed)
    if name == "nh2021-paper-scale":
        return paper_scale_config(seed)
    raise ConfigError(f"unknown training preset {name!r}; ablation presets run via `ablate`")


def with_overrides(cfg, **overrides):
    """Apply CLI/flag overrides onto a preset config."""
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
