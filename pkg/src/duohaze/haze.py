"""Atmospheric scattering model: synthetic haze generation and its inverse.

The physical model relating a clean scene J, a hazy observation I, a
per-pixel transmission map t and a global atmospheric light A is

    I(x) = J(x) * t(x) + A * (1 - t(x))

with t(x) = exp(-beta * d(x)) under the homogeneous assumption (beta is
the scattering coefficient, d the scene depth in meters). These routines
are pure functions over float arrays and double as an analytic oracle
for round-trip testing of the learned pipeline.
"""

import numpy as np

from .errors import ConfigError, DimensionError, SingularityError

DEPTH_MODES = ("constant", "linear-ramp", "radial")

DEFAULT_EPSILON = 1e-3


def _as_field(t, shape):
    """Validate a transmission map against an image's spatial shape."""
    t = np.asarray(t)
    if t.shape != shape:
        raise DimensionError(f"transmission shape {t.shape} != image spatial shape {shape}")
    return t


def _as_light(A):
    """Normalize atmospheric light to a broadcastable (3,) or scalar array."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim not in (0, 1) or (A.ndim == 1 and A.shape[0] != 3):
        raise DimensionError(f"atmospheric light must be scalar or 3-vector, got shape {A.shape}")
    if np.any(A < 0.0) or np.any(A > 1.0):
        raise ValueError("atmospheric light must lie in [0, 1] per channel")
    return A


def synthesize_haze(clean, t, A):
    """Apply the scattering model: I = J * t + A * (1 - t).

    Args:
        clean: H x W x 3 array in [0, 1].
        t: H x W transmission map, values in [0, 1].
        A: scalar or length-3 atmospheric light in [0, 1].

    Returns:
        Hazy image with the same shape and dtype class as ``clean``;
        every output pixel is a convex combination of the clean pixel
        and A, so it stays in [0, 1].
    """
    clean = np.asarray(clean)
    if clean.ndim != 3 or clean.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 image, got shape {clean.shape}")
    t = _as_field(t, clean.shape[:2])
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("transmission values must lie in [0, 1]")
    A = _as_light(A)
    t3 = t[:, :, None]
    return clean * t3 + A * (1.0 - t3)


def transmission_from_depth(depth, beta):
    """Transmission under homogeneous scattering: t = exp(-beta * depth).

    Args:
        depth: H x W array of distances in meters, all >= 0.
        beta: scattering coefficient in 1/m, >= 0.

    Returns:
        H x W transmission map with values in (0, 1].
    """
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth < 0.0):
        raise ValueError("depth must be non-negative")
    if beta < 0.0:
        raise ValueError("scattering coefficient beta must be non-negative")
    return np.exp(-beta * depth)


def invert_haze(hazy, t, A, epsilon=DEFAULT_EPSILON):
    """Analytic inverse of the scattering model: J = (I - A * (1 - t)) / t.

    Only valid where transmission is bounded away from zero; any t below
    ``epsilon`` raises SingularityError. The result is clamped to [0, 1].
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    hazy = np.asarray(hazy)
    if hazy.ndim != 3 or hazy.shape[2] != 3:
        raise DimensionError(f"expected H x W x 3 image, got shape {hazy.shape}")
    t = _as_field(t, hazy.shape[:2])
    if np.any(t < epsilon):
        raise SingularityError(
            f"transmission has values below epsilon={epsilon} (min {t.min():.3g})"
        )
    A = _as_light(A)
    t3 = t[:, :, None]
    J = (hazy - A * (1.0 - t3)) / t3
    return np.clip(J, 0.0, 1.0)


def _depth_field(shape, mode, rng):
    """Build a unit-scale depth field for one of the synthetic modes.

    constant: depth 1 everywhere. linear-ramp: 0 at a random edge rising
    to 1 at the opposite edge. radial: 0 at a sampled center, rising with
    Euclidean distance, normalized so the farthest corner is 1.
    """
    h, w = shape
    if mode == "constant":
        return np.ones((h, w), dtype=np.float64)
    if mode == "linear-ramp":
        axis = int(rng.integers(0, 2))
        flip = bool(rng.integers(0, 2))
        n = shape[axis]
        ramp = np.linspace(0.0, 1.0, n, dtype=np.float64)
        if flip:
            ramp = ramp[::-1]
        return np.broadcast_to(ramp[:, None] if axis == 0 else ramp[None, :], (h, w)).copy()
    if mode == "radial":
        cy = rng.uniform(0.25 * h, 0.75 * h)
        cx = rng.uniform(0.25 * w, 0.75 * w)
        yy, xx = np.mgrid[0:h, 0:w]
        r = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2)
        return r / r.max()
    raise ConfigError(f"unknown depth_mode {mode!r}, expected one of {DEPTH_MODES}")


def make_synthetic_pair(clean, beta, A, depth_mode="radial", rng=None, depth_scale=1.0):
    """Generate an aligned (hazy, clean) pair with a synthetic depth field.

    The depth field is drawn per ``depth_mode`` (see ``_depth_field``),
    scaled by ``depth_scale`` and converted to transmission with
    ``transmission_from_depth``. The ramp and radial modes give spatially
    varying haze density.

    Returns:
        (hazy, clean) tuple of aligned H x W x 3 arrays in [0, 1].
    """
    clean = np.asarray(clean)
    if rng is None:
        rng = np.random.default_rng(0)
    depth = _depth_field(clean.shape[:2], depth_mode, rng) * depth_scale
    t = transmission_from_depth(depth, beta)
    return synthesize_haze(clean, t, A), clean
