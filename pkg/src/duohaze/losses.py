"""Training objectives: smooth L1, SSIM / MS-SSIM, adversarial terms.

All functions take B x C x H x W (or C x H x W) tensors in [0, 1] and
return scalar tensors, so they are differentiable end to end and usable
in float64 for finite-difference verification.

Local SSIM statistics use a Gaussian window applied with reflect
padding, so the output maps keep the input's spatial size; any oracle
checking these values must pad the same way. Contrast-structure values
are clamped at zero before the fractional powers of the multi-scale
product (negative covariances would otherwise produce NaN).
"""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import DimensionError

# Canonical five-scale MS-SSIM weights.
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the weighted four-term objective."""

    l1: float = 1.0
    ms_ssim: float = 0.5
    perceptual: float = 0.01
    adversarial: float = 0.0005

    def __post_init__(self):
        for name in ("l1", "ms_ssim", "perceptual", "adversarial"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"loss weight {name} must be non-negative")


@dataclass(frozen=True)
class SsimConfig:
    """Window and stabilizer settings shared by SSIM and MS-SSIM.

    ``c1``/``c2`` default to (0.01 * data_range)^2 and (0.03 * data_range)^2.
    ``luminance_exponent`` (the exponent on the coarsest-scale luminance
    term) defaults to the last scale weight.
    """

    window_size: int = 11
    gaussian_sigma: float = 1.5
    data_range: float = 1.0
    c1: float | None = None
    c2: float | None = None
    num_scales: int = 5
    scale_weights: tuple = MS_SSIM_WEIGHTS
    luminance_exponent: float | None = None

    def __post_init__(self):
        if self.window_size < 3 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 3")
        if self.gaussian_sigma <= 0.0:
            raise ValueError("gaussian_sigma must be positive")
        if self.num_scales < 1:
            raise ValueError("num_scales must be >= 1")
        if len(self.scale_weights) != self.num_scales:
            raise ValueError(
                f"scale_weights has {len(self.scale_weights)} entries "
                f"but num_scales is {self.num_scales}"
            )
        if self.stabilizer1 <= 0.0 or self.stabilizer2 <= 0.0:
            raise ValueError("stabilizers c1 and c2 must be positive")

    @property
    def stabilizer1(self):
        return self.c1 if self.c1 is not None else (0.01 * self.data_range) ** 2

    @property
    def stabilizer2(self):
        return self.c2 if self.c2 is not None else (0.03 * self.data_range) ** 2

    @property
    def coarse_luminance_exponent(self):
        if self.luminance_exponent is not None:
            return self.luminance_exponent
        return self.scale_weights[-1]

    @classmethod
    def for_scales(cls, num_scales, **kwargs):
        """Config with the canonical weights truncated to ``num_scales``
        and renormalized to sum to one (for images too small for 5 dyadic
        scales)."""
        if not 1 <= num_scales <= len(MS_SSIM_WEIGHTS):
            raise ValueError(f"num_scales must be in [1, {len(MS_SSIM_WEIGHTS)}]")
        w = MS_SSIM_WEIGHTS[:num_scales]
        total = sum(w)
        return cls(
            num_scales=num_scales,
            scale_weights=tuple(x / total for x in w),
            **kwargs,
        )


def _batched(x):
    if x.dim() == 3:
        return x.unsqueeze(0)
    if x.dim() == 4:
        return x
    raise DimensionError(f"expected 3D or 4D tensor, got {x.dim()}D")


def _check_same_shape(pred, gt):
    if pred.shape != gt.shape:
        raise DimensionError(f"shape mismatch: pred {tuple(pred.shape)} vs gt {tuple(gt.shape)}")


def smooth_l1(pred, gt):
    """Mean robust L1: 0.5 z^2 for |z| < 1, |z| - 0.5 otherwise, z = gt - pred."""
    _check_same_shape(pred, gt)
    z = gt - pred
    az = z.abs()
    return torch.where(az < 1.0, 0.5 * z * z, az - 0.5).mean()


def gaussian_window(size, sigma, dtype=torch.float32, device=None):
    """Normalized 2D Gaussian window of the given odd size."""
    half = (size - 1) / 2.0
    coords = torch.arange(size, dtype=dtype, device=device) - half
    g = torch.exp(-(coords**2) / (2.0 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def _gaussian_filter(x, window):
    """Per-channel Gaussian filtering with reflect padding (same-size out)."""
    k = window.shape[-1]
    pad = k // 2
    xp = F.pad(x, (pad, pad, pad, pad), mode="reflect")
    weight = window.expand(x.shape[1], 1, k, k)
    return F.conv2d(xp, weight, groups=x.shape[1])


def _ssim_maps(a, b, cfg, window=None):
    """Per-pixel luminance and contrast-structure maps.

        l  = (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1)
        cs = (2 sigma_ab + C2) / (sigma_a^2 + sigma_b^2 + C2)

    with local statistics from a Gaussian window.
    """
    if min(a.shape[-2], a.shape[-1]) < cfg.window_size:
        raise DimensionError(
            f"image {tuple(a.shape[-2:])} smaller than SSIM window {cfg.window_size}"
        )
    if window is None:
        window = gaussian_window(cfg.window_size, cfg.gaussian_sigma, dtype=a.dtype, device=a.device)
    c1 = cfg.stabilizer1
    c2 = cfg.stabilizer2
    mu_a = _gaussian_filter(a, window)
    mu_b = _gaussian_filter(b, window)
    var_a = _gaussian_filter(a * a, window) - mu_a * mu_a
    var_b = _gaussian_filter(b * b, window) - mu_b * mu_b
    cov = _gaussian_filter(a * b, window) - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(pred, gt, cfg=None):
    """Single-scale SSIM: mean over pixels and channels of l * cs."""
    cfg = cfg or SsimConfig()
    _check_same_shape(pred, gt)
    a, b = _batched(pred), _batched(gt)
    lum, cs = _ssim_maps(a, b, cfg)
    return (lum * cs).mean()


def ms_ssim_loss(pred, gt, cfg=None):
    """Multi-scale SSIM loss: 1 - l_M^alpha * prod_j mean(cs_j)^beta_j.

    Images are halved by 2x2 average pooling between scales; the
    luminance term is taken at the coarsest scale only. The window must
    fit the coarsest scale, i.e. min(H, W) // 2^(M-1) >= window_size.
    """
    cfg = cfg or SsimConfig()
    _check_same_shape(pred, gt)
    a, b = _batched(pred), _batched(gt)
    m = cfg.num_scales
    coarsest = min(a.shape[-2], a.shape[-1]) // (2 ** (m - 1))
    if coarsest < cfg.window_size:
        raise DimensionError(
            f"image {tuple(a.shape[-2:])} too small for {m} scales with "
            f"window {cfg.window_size} (coarsest side {coarsest})"
        )
    window = gaussian_window(cfg.window_size, cfg.gaussian_sigma, dtype=a.dtype, device=a.device)
    cs_means = []
    lum_mean = None
    for j in range(m):
        lum, cs = _ssim_maps(a, b, cfg, window=window)
        cs_means.append(F.relu(cs).mean(dim=(1, 2, 3)))
        if j == m - 1:
            lum_mean = lum.mean(dim=(1, 2, 3))
        else:
            a = F.avg_pool2d(a, kernel_size=2)
            b = F.avg_pool2d(b, kernel_size=2)
    score = lum_mean.clamp_min(0.0) ** cfg.coarse_luminance_exponent
    for w, cs_mean in zip(cfg.scale_weights, cs_means):
        score = score * cs_mean**w
    return (1.0 - score).mean()


def _score_terms(scores, discriminator, target_real):
    """Stable -log D / -log(1 - D) on a score grid.

    Discriminators advertising ``output_mode == "logits"`` get the
    softplus formulation (exactly -log sigmoid in exact arithmetic);
    probability outputs get a clamped log.
    """
    mode = getattr(discriminator, "output_mode", "probability")
    if mode == "logits":
        return F.softplus(-scores) if target_real else F.softplus(scores)
    eps = torch.finfo(scores.dtype).tiny
    p = scores if target_real else 1.0 - scores
    return -torch.log(p.clamp_min(eps))


def adversarial_loss(pred, discriminator):
    """Generator-side adversarial term: mean of -log D(pred) over the
    score grid and batch."""
    scores = discriminator(_batched(pred))
    return _score_terms(scores, discriminator, target_real=True).mean()


def discriminator_loss(real, fake, discriminator):
    """Two-term discriminator objective:
    mean(-log D(real)) + mean(-log(1 - D(fake)))."""
    _check_same_shape(real, fake)
    real_scores = discriminator(_batched(real))
    fake_scores = discriminator(_batched(fake))
    real_term = _score_terms(real_scores, discriminator, target_real=True).mean()
    fake_term = _score_terms(fake_scores, discriminator, target_real=False).mean()
    return real_term + fake_term


def total_loss(pred, gt, weights=None, ssim_cfg=None, perceptual=None, discriminator=None):
    """Weighted sum of the four terms, with a per-term breakdown.

    Terms with zero weight are skipped (reported as 0.0 in the
    breakdown); the perceptual extractor and discriminator are only
    required when their weights are positive.

    Returns:
        (total, breakdown) where total is a scalar tensor and breakdown
        maps {"l1", "ms_ssim", "perceptual", "adversarial", "total"} to
        floats for logging.
    """
    weights = weights or LossWeights()
    terms = {"l1": None, "ms_ssim": None, "perceptual": None, "adversarial": None}
    if weights.l1 > 0.0:
        terms["l1"] = smooth_l1(pred, gt)
    if weights.ms_ssim > 0.0:
        terms["ms_ssim"] = ms_ssim_loss(pred, gt, ssim_cfg)
    if weights.perceptual > 0.0:
        if perceptual is None:
            raise ValueError("perceptual weight > 0 but no feature extractor given")
        terms["perceptual"] = perceptual.loss(pred, gt)
    if weights.adversarial > 0.0:
        if discriminator is None:
            raise ValueError("adversarial weight > 0 but no discriminator given")
        terms["adversarial"] = adversarial_loss(pred, discriminator)

    total = None
    for name, gamma in (
        ("l1", weights.l1),
        ("ms_ssim", weights.ms_ssim),
        ("perceptual", weights.perceptual),
        ("adversarial", weights.adversarial),
    ):
        if terms[name] is None:
            continue
        piece = gamma * terms[name]
        total = piece if total is None else total + piece
    if total is None:
        total = torch.zeros((), dtype=pred.dtype, device=pred.device)

    breakdown = {
        name: (0.0 if t is None else float(t.detach())) for name, t in terms.items()
    }
    breakdown["total"] = float(total.detach())
    return total, breakdown
