"""Optimization loop: Adam with the published recipe, alternating
discriminator/generator updates, checkpointing and deterministic seeding.

One train step is: update the discriminator on (clean, detached dehazed)
pairs, then update the generator on the weighted four-term objective.
The loss log is newline-delimited tab-separated text with columns
(step, l1, msssim, perc, adv, total).
"""

import hashlib
import io
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from .arch import ModelConfig, TwoBranchDehazer, load_pretrained_encoder
from .data import AugmentationConfig, batch_iterator
from .discriminator import PatchDiscriminator
from .errors import CheckpointIntegrityError, ConfigError, NonFiniteLossError, WeightLoadError
from .imgio import batch_to_tensor
from .losses import LossWeights, SsimConfig, discriminator_loss, total_loss
from .perceptual import PerceptualConfig, PerceptualLoss

CHECKPOINT_SCHEMA_VERSION = 1

LOG_COLUMNS = ("step", "l1", "msssim", "perc", "adv", "total")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    loss_weights: LossWeights = field(default_factory=LossWeights)
    ssim: SsimConfig = field(default_factory=SsimConfig)
    max_steps: int = 1000
    seed: int = 0
    checkpoint_every: int = 500
    use_pretrained_encoder: bool = False
    encoder_weights: str | None = None
    enable_tl_branch: bool = True
    enable_cdf_branch: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    augment: AugmentationConfig = field(default_factory=AugmentationConfig)
    batch_size: int = 4
    disc_base_width: int = 64
    perceptual_weights: str | None = None
    lr_schedule: str = "constant"  # "constant" or "cosine"
    val_every: int = 200
    early_stop_psnr: float | None = None

    def __post_init__(self):
        if self.lr <= 0.0:
            raise ConfigError("learning rate must be positive")
        if not (self.enable_tl_branch or self.enable_cdf_branch):
            raise ConfigError("at least one branch must be enabled")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ConfigError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")

    def resolved_model_config(self):
        """Model config with the branch-enable flags applied."""
        return replace(
            self.model,
            enable_tl_branch=self.enable_tl_branch,
            enable_cdf_branch=self.enable_cdf_branch,
        )

    def to_dict(self):
        return asdict(self)


def build_model(cfg):
    """Construct the generator per config, loading encoder weights when
    requested (from cfg.encoder_weights, a backbone-layout state dict)."""
    model = TwoBranchDehazer(cfg.resolved_model_config())
    if cfg.use_pretrained_encoder:
        if not cfg.enable_tl_branch:
            raise ConfigError("use_pretrained_encoder requires the transfer branch")
        if cfg.encoder_weights is None:
            raise ConfigError("use_pretrained_encoder=True but encoder_weights is unset")
        from .arch import load_parameter_store

        store = load_parameter_store(cfg.encoder_weights)
        report = load_pretrained_encoder(model, store, strict=False)
        if not report.loaded:
            raise WeightLoadError(
                f"no encoder keys loaded from {cfg.encoder_weights}"
            )
    return model


def setup_determinism(seed):
    """Single-device deterministic math; returns the numpy generator that
    owns all data-side randomness."""
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True)
    return np.random.default_rng(seed)


def _check_finite(breakdown):
    for term, value in breakdown.items():
        if not np.isfinite(value):
            raise NonFiniteLossError(term, value)


def train_step(batch, model, disc, optimizers, cfg, perceptual=None):
    """One optimization step on a batch of ImagePairs.

    Returns the loss record: dict with the four term values, the total,
    and the discriminator loss (0.0 when adversarial training is off).
    """
    hazy = batch_to_tensor([p.hazy for p in batch])
    clean = batch_to_tensor([p.clean for p in batch])
    gen_opt, disc_opt = optimizers

    dehazed = model(hazy)

    disc_value = 0.0
    if disc is not None:
        disc_opt.zero_grad(set_to_none=True)
        d_loss = discriminator_loss(clean, dehazed.detach(), disc)
        d_loss.backward()
        disc_opt.step()
        disc_value = float(d_loss.detach())

    gen_opt.zero_grad(set_to_none=True)
    total, breakdown = total_loss(
        dehazed,
        clean,
        weights=cfg.loss_weights,
        ssim_cfg=cfg.ssim,
        perceptual=perceptual,
        discriminator=disc,
    )
    breakdown["disc"] = disc_value
    _check_finite(breakdown)
    total.backward()
    gen_opt.step()
    return breakdown


def _training_psnr(model, dataset):
    """Mean full-image PSNR over the training pairs (for early stopping)."""
    from .eval import psnr

    model.eval()
    values = []
    with torch.no_grad():
        for pair in dataset:
            out = model(batch_to_tensor([pair.hazy]))
            pred = out[0].permute(1, 2, 0).numpy()
            values.append(psnr(pred, pair.clean))
    model.train()
    return float(np.mean(values))


def train(cfg, dataset, val_dataset=None, out_dir=None, log_hook=None):
    """Run the full recipe for cfg.max_steps.

    Writes checkpoints and the loss log under ``out_dir`` when given.
    Returns (checkpoint, records): the final checkpoint dict and the
    per-step loss records. ``log_hook`` is called with each record.
    """
    if not dataset:
        raise ConfigError("dataset is empty")
    setup_determinism(cfg.seed)

    model = build_model(cfg)
    model.train()

    disc = None
    if cfg.loss_weights.adversarial > 0.0:
        disc = PatchDiscriminator(base_width=cfg.disc_base_width)
        disc.train()
    perceptual = None
    if cfg.loss_weights.perceptual > 0.0:
        perceptual = PerceptualLoss(PerceptualConfig(weights_path=cfg.perceptual_weights))

    gen_opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2))
    disc_opt = (
        torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2))
        if disc is not None
        else None
    )
    scheduler = None
    if cfg.lr_schedule == "cosine" and cfg.max_steps > 0:
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(gen_opt, T_max=cfg.max_steps)

    records = []
    log_lines = ["\t".join(LOG_COLUMNS)]
    step = 0
    epoch = 0
    stop = cfg.max_steps == 0
    while not stop:
        for batch in batch_iterator(dataset, cfg.augment, cfg.batch_size, epoch_seed=(cfg.seed, epoch)):
            record = train_step(batch, model, disc, (gen_opt, disc_opt), cfg, perceptual)
            if scheduler is not None:
                scheduler.step()
            step += 1
            record["step"] = step
            records.append(record)
            log_lines.append(
                "\t".join(
                    [str(step)]
                    + [f"{record[k]:.8f}" for k in ("l1", "ms_ssim", "perceptual", "adversarial", "total")]
                )
            )
            if log_hook is not None:
                log_hook(record)
            if out_dir and cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                save_checkpoint(
                    os.path.join(out_dir, f"step{step:06d}.ckpt"),
                    make_checkpoint(model, disc, gen_opt, disc_opt, step, cfg),
                )
            if cfg.early_stop_psnr is not None and step % cfg.val_every == 0:
                if _training_psnr(model, dataset) >= cfg.early_stop_psnr:
                    stop = True
            if val_dataset and step % cfg.val_every == 0:
                from .eval import quick_metrics

                m = quick_metrics(model, val_dataset)
                record["val_psnr"] = m["psnr"]
                record["val_ssim"] = m["ssim"]
            if step >= cfg.max_steps:
                stop = True
            if stop:
                break
        epoch += 1

    ckpt = make_checkpoint(model, disc, gen_opt, disc_opt, step, cfg)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        save_checkpoint(os.path.join(out_dir, "final.ckpt"), ckpt)
        with open(os.path.join(out_dir, "loss_log.tsv"), "w") as fh:
            fh.write("\n".join(log_lines) + "\n")
    return ckpt, records


def make_checkpoint(model, disc, gen_opt, disc_opt, step, cfg):
    return {
        "model_state": model.state_dict(),
        "disc_state": disc.state_dict() if disc is not None else None,
        "gen_opt_state": gen_opt.state_dict() if gen_opt is not None else None,
        "disc_opt_state": disc_opt.state_dict() if disc_opt is not None else None,
        "step": step,
        "config": cfg.to_dict() if cfg is not None else None,
    }


def save_checkpoint(path, checkpoint):
    """Serialize with an embedded sha256 so corruption is detectable."""
    path = os.fspath(path)
    buf = io.BytesIO()
    torch.save(checkpoint, buf)
    payload = buf.getvalue()
    container = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "checksum": hashlib.sha256(payload).hexdigest(),
        "payload": payload,
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp = path + ".tmp"
    torch.save(container, tmp)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Load and verify a checkpoint; raises CheckpointIntegrityError on
    any corruption or schema mismatch."""
    try:
        container = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise CheckpointIntegrityError(f"unreadable checkpoint {path}: {e}") from e
    if not isinstance(container, dict) or "payload" not in container:
        raise CheckpointIntegrityError(f"{path} is not a checkpoint container")
    if container.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointIntegrityError(
            f"unsupported checkpoint schema {container.get('schema_version')!r}"
        )
    payload = container["payload"]
    digest = hashlib.sha256(payload).hexdigest()
    if digest != container.get("checksum"):
        raise CheckpointIntegrityError(f"checksum mismatch in {path}")
    return torch.load(io.BytesIO(payload), map_location="cpu", weights_only=False)


def restore_model(checkpoint, model=None):
    """Build (or fill) a model from a checkpoint.

    Raises WeightLoadError naming the first offending key if the
    checkpoint was produced under an incompatible ModelConfig.
    """
    if model is None:
        cfg_dict = (checkpoint.get("config") or {}).get("model")
        flags = checkpoint.get("config") or {}
        model_cfg = ModelConfig.from_dict(cfg_dict) if cfg_dict else ModelConfig()
        if "enable_tl_branch" in flags:
            model_cfg = replace(
                model_cfg,
                enable_tl_branch=flags["enable_tl_branch"],
                enable_cdf_branch=flags["enable_cdf_branch"],
            )
        model = TwoBranchDehazer(model_cfg)
    own = model.state_dict()
    state = checkpoint["model_state"]
    for key, tensor in state.items():
        if key not in own:
            raise WeightLoadError(f"checkpoint key {key!r} not in model")
        if tuple(own[key].shape) != tuple(tensor.shape):
            raise WeightLoadError(
                f"shape mismatch for key {key!r}: checkpoint {tuple(tensor.shape)} "
                f"vs model {tuple(own[key].shape)}"
            )
    missing = [k for k in own if k not in state]
    if missing:
        raise WeightLoadError(f"checkpoint missing model key {missing[0]!r}")
    model.load_state_dict(state)
    return model


def loss_log_to_text(records):
    lines = ["\t".join(LOG_COLUMNS)]
    for r in records:
        lines.append(
            "\t".join(
                [str(r["step"])]
                + [f"{r[k]:.8f}" for k in ("l1", "ms_ssim", "perceptual", "adversarial", "total")]
            )
        )
    return "\n".join(lines) + "\n"


def config_fingerprint(cfg):
    """Stable short hash of a config dict for reports and manifests."""
    as_json = json.dumps(cfg.to_dict() if hasattr(cfg, "to_dict") else cfg, sort_keys=True, default=str)
    return hashlib.sha256(as_json.encode()).hexdigest()[:12]
