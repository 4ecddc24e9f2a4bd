"""Independent brute-force oracles for the loss and metric tests.

Everything here is plain numpy float64: explicit Gaussian windows,
sliding-window local statistics via stride tricks, block-mean
downsampling. No torch, no shared code with the package internals, so a
bug in the implementation cannot hide in its own oracle.

Boundary convention matched to the documented one: reflect padding
(edge sample not repeated) and same-size output maps.
"""

import numpy as np


def gaussian_window_np(size, sigma):
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def _filter2d_reflect(plane, window):
    """Windowed correlation with reflect padding, same-size output."""
    k = window.shape[0]
    pad = k // 2
    padded = np.pad(plane, pad, mode="reflect")
    patches = np.lib.stride_tricks.sliding_window_view(padded, (k, k))
    return np.tensordot(patches, window, axes=([2, 3], [0, 1]))


def ssim_maps_np(a, b, window_size=11, sigma=1.5, c1=0.01**2, c2=0.03**2):
    """Per-pixel luminance and contrast-structure maps for one channel."""
    w = gaussian_window_np(window_size, sigma)
    mu_a = _filter2d_reflect(a, w)
    mu_b = _filter2d_reflect(b, w)
    var_a = _filter2d_reflect(a * a, w) - mu_a**2
    var_b = _filter2d_reflect(b * b, w) - mu_b**2
    cov = _filter2d_reflect(a * b, w) - mu_a * mu_b
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a**2 + mu_b**2 + c1)
    cs = (2.0 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim_np(a, b, window_size=11, sigma=1.5, c1=0.01**2, c2=0.03**2):
    """Mean of l * cs over pixels and channels for H x W x C images."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    values = []
    for c in range(a.shape[2]):
        lum, cs = ssim_maps_np(a[:, :, c], b[:, :, c], window_size, sigma, c1, c2)
        values.append(lum * cs)
    return float(np.mean(values))


def _downsample2_np(plane):
    """2x2 block mean, floor semantics on odd sizes."""
    h, w = plane.shape
    h2, w2 = h // 2, w // 2
    return plane[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def ms_ssim_loss_np(
    a,
    b,
    num_scales=5,
    scale_weights=(0.0448, 0.2856, 0.3001, 0.2363, 0.1333),
    luminance_exponent=None,
    window_size=11,
    sigma=1.5,
    c1=0.01**2,
    c2=0.03**2,
):
    """1 - l_M^alpha * prod_j mean(cs_j)^beta_j, cs clamped at 0.

    cs means are taken over pixels and channels per scale; the luminance
    mean is taken at the coarsest scale only. Inputs are H x W x C.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if luminance_exponent is None:
        luminance_exponent = scale_weights[-1]
    chans_a = [a[:, :, c] for c in range(a.shape[2])]
    chans_b = [b[:, :, c] for c in range(b.shape[2])]
    cs_means = []
    lum_mean = None
    for j in range(num_scales):
        lum_all, cs_all = [], []
        for pa, pb in zip(chans_a, chans_b):
            lum, cs = ssim_maps_np(pa, pb, window_size, sigma, c1, c2)
            lum_all.append(lum)
            cs_all.append(np.maximum(cs, 0.0))
        cs_means.append(float(np.mean(cs_all)))
        if j == num_scales - 1:
            lum_mean = float(np.mean(lum_all))
        else:
            chans_a = [_downsample2_np(p) for p in chans_a]
            chans_b = [_downsample2_np(p) for p in chans_b]
    score = max(lum_mean, 0.0) ** luminance_exponent
    for w_j, cs_mean in zip(scale_weights, cs_means):
        score *= cs_mean**w_j
    return 1.0 - score


def psnr_np(a, b, data_range=1.0):
    mse = np.mean((np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2)
    return 10.0 * np.log10(data_range**2 / mse)


def numeric_gradient(fn, x, eps=1e-6):
    """Central finite differences of a scalar function of an array."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn(x)
        flat[i] = orig - eps
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad
