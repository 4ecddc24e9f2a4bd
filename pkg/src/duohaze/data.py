"""Paired dataset loading, splits, augmentation and preprocessing.

Expected directory layout:

    <root>/hazy/*.png   hazy inputs
    <root>/GT/*.png     clean ground truths, same stems

Splits come either from manifest files (``<root>/splits/<split>.txt``,
one id per line, the "official" rule) or positionally: the first 20 ids
are the training set and the remainder the evaluation set, matching the
25-pair challenge protocol. Under the positional rule val and test refer
to the same held-out ids.
"""

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, PairingError
from .imgio import load_image

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")

SPLITS = ("train", "val", "test")
SPLIT_RULES = ("official", "first20_last5", "all")


@dataclass
class ImagePair:
    hazy: np.ndarray
    clean: np.ndarray
    id: str

    def __post_init__(self):
        if self.hazy.shape != self.clean.shape:
            raise DimensionError(
                f"pair {self.id!r}: hazy {self.hazy.shape} vs clean {self.clean.shape}"
            )


@dataclass
class DatasetSpec:
    root: str
    split: str = "train"
    split_rule: str = "first20_last5"
    hazy_dir: str = "hazy"
    gt_dir: str = "GT"
    train_count: int = 20

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ConfigError(f"unknown split {self.split!r}, expected one of {SPLITS}")
        if self.split_rule not in SPLIT_RULES:
            raise ConfigError(f"unknown split_rule {self.split_rule!r}, expected one of {SPLIT_RULES}")


@dataclass
class AugmentationConfig:
    """One rotation from ``rotations``, independent flips, one random crop."""

    rotations: tuple = (0, 90, 180, 270)
    hflip: bool = True
    vflip: bool = True
    crop_size: int = 256
    seed: int = 0

    def __post_init__(self):
        bad = set(self.rotations) - {0, 90, 180, 270}
        if bad:
            raise ConfigError(f"rotations must be multiples of 90 in [0, 270], got {bad}")
        if not self.rotations:
            raise ConfigError("rotations must not be empty (use (0,) to disable)")
        if self.crop_size < 1:
            raise ConfigError("crop_size must be >= 1")


def _index_files(directory):
    if not os.path.isdir(directory):
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    out = {}
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() in IMAGE_EXTENSIONS:
            out[stem] = os.path.join(directory, name)
    return out


def _read_manifest(path):
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def _select_ids(ids, spec):
    if spec.split_rule == "all":
        return ids
    manifest = os.path.join(spec.root, "splits", f"{spec.split}.txt")
    if os.path.isfile(manifest):
        # a split manifest on disk overrides any positional rule
        wanted = _read_manifest(manifest)
        missing = [i for i in wanted if i not in ids]
        if missing:
            raise PairingError(f"manifest ids without files: {missing}")
        return [i for i in ids if i in set(wanted)]
    if spec.split_rule == "official":
        raise ConfigError(f"official split rule needs a manifest at {manifest}")
    # positional rule: first train_count ids train, the rest held out
    if len(ids) <= spec.train_count:
        raise ConfigError(
            f"positional split needs more than {spec.train_count} pairs, found {len(ids)}"
        )
    if spec.split == "train":
        return ids[: spec.train_count]
    return ids[spec.train_count :]


def load_paired_dataset(spec):
    """Load and validate all pairs for one split, ordered by id.

    Raises PairingError listing every orphan file if the hazy and clean
    directories do not match one-to-one.
    """
    hazy_files = _index_files(os.path.join(spec.root, spec.hazy_dir))
    clean_files = _index_files(os.path.join(spec.root, spec.gt_dir))
    orphan_hazy = sorted(set(hazy_files) - set(clean_files))
    orphan_clean = sorted(set(clean_files) - set(hazy_files))
    if orphan_hazy or orphan_clean:
        raise PairingError(
            f"unpaired files: hazy-only {orphan_hazy}, clean-only {orphan_clean}"
        )
    ids = _select_ids(sorted(hazy_files), spec)
    pairs = []
    for pid in ids:
        try:
            hazy = load_image(hazy_files[pid])
            clean = load_image(clean_files[pid])
        except OSError as e:
            raise OSError(f"failed to read pair {pid!r}: {e}") from e
        pairs.append(ImagePair(hazy=hazy, clean=clean, id=pid))
    return pairs


def _apply_geometry(img, rotation, do_hflip, do_vflip, crop):
    """Rotate (whole image, so rectangular sources stay valid), flip,
    then crop. ``crop`` is (top, left, size) in post-rotation/flip
    coordinates."""
    out = img
    if rotation:
        out = np.rot90(out, k=rotation // 90, axes=(0, 1))
    if do_hflip:
        out = out[:, ::-1]
    if do_vflip:
        out = out[::-1, :]
    top, left, size = crop
    return np.ascontiguousarray(out[top : top + size, left : left + size])


def augment(pair, cfg, rng):
    """Apply one random geometric transform identically to both images.

    ``rng`` is a numpy Generator; passing generators seeded the same way
    reproduces the same transform.
    """
    h, w = pair.hazy.shape[:2]
    if min(h, w) < cfg.crop_size:
        raise DimensionError(
            f"pair {pair.id!r} is {h}x{w}, smaller than crop_size {cfg.crop_size}"
        )
    rotation = int(cfg.rotations[rng.integers(0, len(cfg.rotations))])
    do_hflip = bool(cfg.hflip and rng.integers(0, 2))
    do_vflip = bool(cfg.vflip and rng.integers(0, 2))
    rh, rw = (w, h) if rotation in (90, 270) else (h, w)
    top = int(rng.integers(0, rh - cfg.crop_size + 1))
    left = int(rng.integers(0, rw - cfg.crop_size + 1))
    crop = (top, left, cfg.crop_size)
    return ImagePair(
        hazy=_apply_geometry(pair.hazy, rotation, do_hflip, do_vflip, crop),
        clean=_apply_geometry(pair.clean, rotation, do_hflip, do_vflip, crop),
        id=pair.id,
    )


def gamma_correct(image, gamma):
    """Elementwise power-law remap; gamma < 1 brightens. Input in [0, 1]."""
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    image = np.asarray(image)
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("gamma correction expects values in [0, 1]")
    return np.power(image, gamma)


def gamma_correct_pair(pair, gamma, apply_to="both"):
    """Gamma-correct a pair. ``apply_to`` selects hazy, clean or both
    (the challenge protocol does not pin this down, so it is a flag)."""
    if apply_to not in ("hazy", "clean", "both"):
        raise ConfigError(f"apply_to must be hazy/clean/both, got {apply_to!r}")
    hazy = gamma_correct(pair.hazy, gamma) if apply_to in ("hazy", "both") else pair.hazy
    clean = gamma_correct(pair.clean, gamma) if apply_to in ("clean", "both") else pair.clean
    return ImagePair(hazy=hazy, clean=clean, id=pair.id)


def synthetic_pairs(count, size=(160, 160), beta=0.6, light=(0.85, 0.85, 0.85),
                    depth_mode="radial", seed=0):
    """Desk-scale stand-in dataset: textured random clean images hazed
    with the scattering model. Pairs are deterministic in ``seed``."""
    from .haze import make_synthetic_pair

    rng = np.random.default_rng(seed)
    h, w = size
    pairs = []
    for i in range(count):
        clean = _textured_image(h, w, rng)
        hazy, clean = make_synthetic_pair(clean, beta=beta, A=light, depth_mode=depth_mode, rng=rng)
        pairs.append(ImagePair(hazy=hazy.astype(np.float32), clean=clean.astype(np.float32), id=f"synth{i:03d}"))
    return pairs


def _textured_image(h, w, rng):
    """Smooth multi-scale random field in [0, 1] with mild detail."""
    import torch
    import torch.nn.functional as F

    out = np.zeros((h, w, 3), dtype=np.float64)
    for cells, weight in ((6, 1.0), (24, 0.35), (96, 0.1)):
        coarse = rng.random((min(cells, h), min(cells, w), 3))
        t = torch.from_numpy(coarse).permute(2, 0, 1).unsqueeze(0)
        up = F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False)
        out += weight * up[0].permute(1, 2, 0).numpy()
    out /= 1.45
    return np.clip(out, 0.0, 1.0)


def batch_iterator(dataset, cfg, batch_size, epoch_seed):
    """One epoch of augmented batches, shuffled by ``epoch_seed``.

    Every sample's augmentation draw is seeded by (epoch_seed, position),
    never by worker identity, so iteration order fully determines the
    epoch. The final partial batch is included.
    """
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if not dataset:
        raise ConfigError("dataset is empty")
    base = (epoch_seed,) if isinstance(epoch_seed, int) else tuple(epoch_seed)
    order = np.random.default_rng(base).permutation(len(dataset))
    batch = []
    for pos, idx in enumerate(order):
        draw = np.random.default_rng(base + (pos,))
        batch.append(augment(dataset[int(idx)], cfg, draw))
        if len(batch) == batch_size:
            yield batch
            batch = []
    if batch:
        yield batch
