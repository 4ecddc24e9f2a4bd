"""PSNR/SSIM metrics, dataset evaluation, the ablation and fusion-tail
study runners, and the complexity profiler.

PSNR is computed on [0, 1] floats from the full-tensor MSE (all pixels
and channels pooled, no 8-bit quantization), capped at 100 dB so
identical images serialize cleanly. Evaluation SSIM is the single-scale
kernel shared with the loss module, window 11 and sigma 1.5.
"""

import os
import statistics
import tempfile
import time
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .arch import count_parameters
from .data import AugmentationConfig
from .errors import ConfigError, DimensionError
from .imgio import batch_to_tensor, to_image, to_tensor
from .losses import LossWeights, SsimConfig, ssim
from .train import TrainConfig, config_fingerprint, restore_model, train

PSNR_CAP_DB = 100.0

EVAL_SSIM_CONFIG = SsimConfig(window_size=11, gaussian_sigma=1.5, num_scales=1, scale_weights=(1.0,))

# Row labels of the five-configuration ablation protocol.
ABLATION_PRESETS = (
    ("TL", False),
    ("TL", True),
    ("CDF", False),
    ("TL + CDF", False),
    ("Ours", True),
)

FUSION_STUDY_LABELS = {
    "three_residual_blocks": "three stacked residual blocks",
    "three_convs": "three convolution layers",
    "single_conv_tanh": "Ours",
}


def psnr(pred, gt, data_range=1.0, cap=PSNR_CAP_DB):
    """Peak signal-to-noise ratio in dB: 10 log10(range^2 / MSE)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    mse = float(np.mean((pred - gt) ** 2))
    if mse == 0.0:
        return cap
    return min(10.0 * np.log10(data_range**2 / mse), cap)


def ssim_metric(pred, gt, cfg=EVAL_SSIM_CONFIG):
    """Single-scale SSIM on [0, 1] images; same kernel as the loss."""
    return float(ssim(to_tensor(pred, torch.float64), to_tensor(gt, torch.float64), cfg))


@dataclass
class MetricsReport:
    rows: list  # (id, psnr_db, ssim) tuples
    param_count: int | None = None
    runtime_seconds: float | None = None
    config_fingerprint: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def mean_psnr(self):
        return float(np.mean([r[1] for r in self.rows])) if self.rows else float("nan")

    @property
    def mean_ssim(self):
        return float(np.mean([r[2] for r in self.rows])) if self.rows else float("nan")

    def to_dict(self):
        return {
            "schema_version": 1,
            "rows": [{"id": i, "psnr_db": p, "ssim": s} for i, p, s in self.rows],
            "mean_psnr_db": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "param_count": self.param_count,
            "runtime_seconds": self.runtime_seconds,
            "config_fingerprint": self.config_fingerprint,
            **self.extra,
        }

    def to_table(self):
        lines = [f"{'id':<24}{'PSNR(dB)':>10}{'SSIM':>8}"]
        for i, p, s in self.rows:
            lines.append(f"{i:<24}{p:>10.2f}{s:>8.4f}")
        lines.append(f"{'mean':<24}{self.mean_psnr:>10.2f}{self.mean_ssim:>8.4f}")
        return "\n".join(lines)


def dehaze_image(model, image):
    """Run one [0, 1] H x W x 3 image through the model deterministically."""
    model.eval()
    with torch.no_grad():
        out = model(batch_to_tensor([image]))
    return np.clip(to_image(out), 0.0, 1.0)


def evaluate(model, dataset, config_for_fingerprint=None):
    """Full-resolution inference over a paired dataset.

    The model handles its own padding policy. Per-image rows are ordered
    like the dataset; means are plain arithmetic means of the rows.
    """
    is_module = isinstance(model, torch.nn.Module)
    rows = []
    for pair in dataset:
        # plain callables (e.g. an identity baseline) are run as-is
        pred = dehaze_image(model, pair.hazy) if is_module else model(pair.hazy)
        rows.append((pair.id, psnr(pred, pair.clean), ssim_metric(pred, pair.clean)))
    fingerprint = config_fingerprint(config_for_fingerprint) if config_for_fingerprint else ""
    return MetricsReport(
        rows=rows,
        param_count=count_parameters(model) if is_module else None,
        config_fingerprint=fingerprint,
    )


def quick_metrics(model, dataset):
    """Mean PSNR/SSIM only, for in-training validation."""
    report = evaluate(model, dataset)
    return {"psnr": report.mean_psnr, "ssim": report.mean_ssim}


@dataclass
class StudyRow:
    label: str
    pretrained: bool
    psnr_db: float
    ssim: float
    param_count: int
    fingerprint: str


@dataclass
class StudyReport:
    """Schema-stable table for the ablation and fusion-tail studies."""

    rows: list
    seed: int
    max_steps: int
    trends: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "schema_version": 1,
            "rows": [
                {
                    "method": r.label,
                    "imagenet_pretraining": r.pretrained,
                    "psnr_db": r.psnr_db,
                    "ssim": r.ssim,
                    "param_count": r.param_count,
                    "config_fingerprint": r.fingerprint,
                }
                for r in self.rows
            ],
            "seed": self.seed,
            "max_steps": self.max_steps,
            "trends": self.trends,
            "notes": self.notes,
        }

    def to_table(self):
        lines = [f"{'Method':<28}{'Pretraining':>12}{'PSNR(dB)':>10}{'SSIM':>8}{'Params':>12}"]
        for r in self.rows:
            mark = "yes" if r.pretrained else "-"
            lines.append(f"{r.label:<28}{mark:>12}{r.psnr_db:>10.2f}{r.ssim:>8.4f}{r.param_count:>12}")
        return "\n".join(lines)


BUDGETS = {
    # micro exists for unit tests of the harness plumbing only
    "micro": {"max_steps": 8, "crop_size": 32, "num_scales": 2, "batch_size": 2},
    "tiny": {"max_steps": 300, "crop_size": 64, "num_scales": 3, "batch_size": 2},
    "small": {"max_steps": 2000, "crop_size": 128, "num_scales": 4, "batch_size": 4},
    "paper": {"max_steps": 200_000, "crop_size": 256, "num_scales": 5, "batch_size": 4},
}


def _budget_config(budget, seed, model_cfg, perceptual_weights=None):
    if budget not in BUDGETS:
        raise ConfigError(f"unknown budget {budget!r}, expected one of {sorted(BUDGETS)}")
    b = BUDGETS[budget]
    return TrainConfig(
        seed=seed,
        max_steps=b["max_steps"],
        batch_size=b["batch_size"],
        model=model_cfg,
        ssim=SsimConfig.for_scales(b["num_scales"]),
        augment=AugmentationConfig(crop_size=b["crop_size"]),
        checkpoint_every=0,
        perceptual_weights=perceptual_weights,
        loss_weights=LossWeights(),
    )


def surrogate_encoder_store(model_cfg, seed=1234):
    """Deterministic stand-in parameter store with the backbone layout.

    Exercises the loading path when no published weights file is on
    disk; reports carry pretrained_source="surrogate" so nobody mistakes
    it for ImageNet features.
    """
    from .arch import TwoBranchDehazer

    torch.manual_seed(seed)
    donor = TwoBranchDehazer(replace(model_cfg, enable_tl_branch=True))
    return {k: v.clone() for k, v in donor.tl.encoder.state_dict().items()}


def _run_one_preset(label, pretrained, train_cfg, train_set, eval_set, encoder_store_path):
    report_cfg = train_cfg
    if pretrained:
        if encoder_store_path is None:
            raise ConfigError("preset requires encoder weights; none provided")
        report_cfg = replace(train_cfg, use_pretrained_encoder=True, encoder_weights=encoder_store_path)
    ckpt, _ = train(report_cfg, train_set)
    model = restore_model(ckpt)
    metrics = evaluate(model, eval_set)
    return StudyRow(
        label=label,
        pretrained=pretrained,
        psnr_db=metrics.mean_psnr,
        ssim=metrics.mean_ssim,
        param_count=count_parameters(model),
        fingerprint=config_fingerprint(report_cfg),
    )


def run_ablation(
    train_set,
    eval_set,
    budget="tiny",
    seed=7,
    model_cfg=None,
    encoder_weights=None,
    perceptual_weights=None,
    on_row=None,
):
    """Train and evaluate the five branch-combination presets under one
    shared seed and step budget.

    ``encoder_weights`` should point at a real published backbone file;
    without one a deterministic surrogate store is synthesized so the
    harness still runs, and the report notes it. The pretraining
    direction (pretrained TL beats random TL) is recorded at every
    budget but asserted only at budget="small" with real weights, where
    it is meaningful.
    """
    from .arch import save_parameter_store, tiny_model_config

    if model_cfg is None:
        model_cfg = tiny_model_config()

    surrogate = encoder_weights is None
    tmp = None
    if surrogate:
        tmp = tempfile.NamedTemporaryFile(suffix=".pt", delete=False)
        save_parameter_store(tmp.name, surrogate_encoder_store(model_cfg))
        encoder_weights = tmp.name
    if budget == "small" and surrogate:
        raise ConfigError(
            "budget='small' asserts the pretraining trend, which needs real "
            "published encoder weights, not a surrogate store"
        )

    rows = []
    failure = None
    try:
        for label, pretrained in ABLATION_PRESETS:
            cfg = _budget_config(budget, seed, model_cfg, perceptual_weights)
            cfg = replace(
                cfg,
                enable_tl_branch="TL" in label or label == "Ours",
                enable_cdf_branch="CDF" in label or label == "Ours",
            )
            try:
                row = _run_one_preset(label, pretrained, cfg, train_set, eval_set, encoder_weights)
            except Exception as e:
                failure = (label, e)
                break
            rows.append(row)
            if on_row is not None:
                on_row(row)
    finally:
        if tmp is not None:
            os.unlink(tmp.name)

    report = StudyReport(rows=rows, seed=seed, max_steps=BUDGETS[budget]["max_steps"])
    report.notes["pretrained_source"] = "surrogate" if surrogate else "file"
    report.notes["budget"] = budget
    if failure is not None:
        report.notes["failed_preset"] = failure[0]
        report.notes["error"] = str(failure[1])
        raise AblationFailure(report, failure[0], failure[1])
    _record_trends(report)
    if budget == "small" and not report.trends["pretrained_tl_beats_random_tl"]:
        raise ConfigError(
            "small-budget ablation: pretrained TL did not beat random TL in PSNR"
        )
    return report


class AblationFailure(RuntimeError):
    """A preset failed; partial results are preserved on the exception."""

    def __init__(self, partial_report, preset, cause):
        self.partial_report = partial_report
        self.preset = preset
        super().__init__(f"ablation preset {preset!r} failed: {cause}")


def _record_trends(report):
    by_key = {(r.label, r.pretrained): r for r in report.rows}
    tl_random = by_key.get(("TL", False))
    tl_pre = by_key.get(("TL", True))
    cdf = by_key.get(("CDF", False))
    both = by_key.get(("TL + CDF", False))
    ours = by_key.get(("Ours", True))
    if tl_random and tl_pre:
        report.trends["pretrained_tl_beats_random_tl"] = tl_pre.psnr_db > tl_random.psnr_db
    if both and tl_random and cdf:
        report.trends["two_branch_beats_single_random"] = both.psnr_db > max(
            tl_random.psnr_db, cdf.psnr_db
        )
    if ours:
        best_single = max(
            (r.psnr_db for r in (tl_random, tl_pre, cdf) if r is not None), default=float("nan")
        )
        report.trends["full_model_beats_single_branches"] = ours.psnr_db > best_single


def run_fusion_tail_study(
    train_set,
    eval_set,
    variants=("single_conv_tanh", "three_convs", "three_residual_blocks"),
    budget="tiny",
    seed=7,
    model_cfg=None,
    perceptual_weights=None,
):
    """Same protocol as the ablation, varying only the fusion tail."""
    from .arch import tiny_model_config

    if model_cfg is None:
        model_cfg = tiny_model_config()
    unknown = set(variants) - set(FUSION_STUDY_LABELS)
    if unknown:
        raise ConfigError(f"unknown fusion tail variants: {sorted(unknown)}")
    rows = []
    for variant in variants:
        cfg = _budget_config(budget, seed, replace(model_cfg, fusion_tail_variant=variant), perceptual_weights)
        row = _run_one_preset(FUSION_STUDY_LABELS[variant], False, cfg, train_set, eval_set, None)
        rows.append(row)
    report = StudyReport(rows=rows, seed=seed, max_steps=BUDGETS[budget]["max_steps"])
    report.notes["budget"] = budget
    report.notes["varied"] = "fusion_tail_variant"
    return report


def profile(model, height=1200, width=1600, repeats=5, warmup=1):
    """Parameter count plus median wall-clock seconds for one forward.

    Timings are hardware-dependent and only ever recorded, never
    asserted against published numbers.
    """
    if height < 1 or width < 1:
        raise DimensionError(f"invalid profile size {height}x{width}")
    model.eval()
    x = torch.rand(1, 3, height, width)
    timings = []
    try:
        with torch.no_grad():
            for i in range(warmup + repeats):
                start = time.perf_counter()
                model(x)
                elapsed = time.perf_counter() - start
                if i >= warmup:
                    timings.append(elapsed)
    except RuntimeError as e:
        if "memory" in str(e).lower():
            raise RuntimeError(f"out of memory profiling {height}x{width}: {e}") from e
        raise
    return {
        "param_count": count_parameters(model),
        "median_seconds": statistics.median(timings),
        "timings": timings,
        "height": height,
        "width": width,
    }
