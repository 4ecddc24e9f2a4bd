"""Dataset loading, split rules, paired augmentation and gamma."""

import numpy as np
import pytest

from duohaze.data import (
    AugmentationConfig,
    DatasetSpec,
    ImagePair,
    augment,
    batch_iterator,
    gamma_correct,
    gamma_correct_pair,
    load_paired_dataset,
    synthetic_pairs,
)
from duohaze.errors import ConfigError, DimensionError, PairingError
from duohaze.imgio import save_image


def write_fake_dataset(root, count=25, size=(40, 40), skip_gt=(), extra_hazy=()):
    rng = np.random.default_rng(9)
    (root / "hazy").mkdir(parents=True)
    (root / "GT").mkdir(parents=True)
    for i in range(count):
        pid = f"{i + 1:02d}"
        img = rng.random((*size, 3))
        save_image(root / "hazy" / f"{pid}.png", img)
        if pid not in skip_gt:
            save_image(root / "GT" / f"{pid}.png", np.clip(img + 0.1, 0, 1))
    for pid in extra_hazy:
        save_image(root / "hazy" / f"{pid}.png", rng.random((*size, 3)))
    return root


class TestLoading:
    def test_positional_split_counts(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=25)
        train = load_paired_dataset(DatasetSpec(root=str(root), split="train"))
        test = load_paired_dataset(DatasetSpec(root=str(root), split="test"))
        assert len(train) == 20
        assert len(test) == 5
        assert {p.id for p in train}.isdisjoint({p.id for p in test})

    def test_ordering_is_lexicographic_and_stable(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=25)
        ids1 = [p.id for p in load_paired_dataset(DatasetSpec(root=str(root), split="train"))]
        ids2 = [p.id for p in load_paired_dataset(DatasetSpec(root=str(root), split="train"))]
        assert ids1 == sorted(ids1) == ids2

    def test_orphan_hazy_named_in_error(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=22, extra_hazy=("zz_orphan",))
        with pytest.raises(PairingError, match="zz_orphan"):
            load_paired_dataset(DatasetSpec(root=str(root)))

    def test_manifest_split(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=25)
        (root / "splits").mkdir()
        (root / "splits" / "train.txt").write_text("03\n07\n11\n")
        got = load_paired_dataset(DatasetSpec(root=str(root), split="train", split_rule="official"))
        assert [p.id for p in got] == ["03", "07", "11"]

    def test_official_without_manifest(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=25)
        with pytest.raises(ConfigError):
            load_paired_dataset(DatasetSpec(root=str(root), split="train", split_rule="official"))

    def test_manifest_overrides_positional_rule(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=25)
        (root / "splits").mkdir()
        (root / "splits" / "train.txt").write_text("05\n09\n")
        got = load_paired_dataset(DatasetSpec(root=str(root), split="train", split_rule="first20_last5"))
        assert [p.id for p in got] == ["05", "09"]

    def test_all_rule_takes_everything(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=7)
        got = load_paired_dataset(DatasetSpec(root=str(root), split="train", split_rule="all"))
        assert len(got) == 7

    def test_loaded_values_in_unit_range(self, tmp_path):
        root = write_fake_dataset(tmp_path / "nh", count=22)
        pair = load_paired_dataset(DatasetSpec(root=str(root), split="train"))[0]
        for img in (pair.hazy, pair.clean):
            assert img.dtype == np.float32
            assert img.min() >= 0.0 and img.max() <= 1.0


def coordinate_tagged_pair(h=32, w=48):
    """Pixels encode their own (row, col) so any geometric
    desynchronization between hazy and clean is detectable."""
    rows = np.arange(h)[:, None] / (h - 1)
    cols = np.arange(w)[None, :] / (w - 1)
    base = np.stack([np.broadcast_to(rows, (h, w)), np.broadcast_to(cols, (h, w)), np.zeros((h, w))], axis=-1)
    hazy = base.copy()
    clean = base.copy()
    clean[:, :, 2] = 1.0  # distinguish the two images
    return ImagePair(hazy=hazy.astype(np.float32), clean=clean.astype(np.float32), id="tagged")


class TestAugment:
    def test_disabled_augmentations_identity(self, rng):
        img = rng.random((32, 32, 3)).astype(np.float32)
        pair = ImagePair(hazy=img, clean=img.copy(), id="x")
        cfg = AugmentationConfig(rotations=(0,), hflip=False, vflip=False, crop_size=32)
        out = augment(pair, cfg, np.random.default_rng(0))
        np.testing.assert_array_equal(out.hazy, img)
        np.testing.assert_array_equal(out.clean, img)

    def test_deterministic_under_fixed_seed(self, rng):
        img = rng.random((48, 64, 3)).astype(np.float32)
        pair = ImagePair(hazy=img, clean=img.copy(), id="x")
        cfg = AugmentationConfig(crop_size=24)
        a = augment(pair, cfg, np.random.default_rng(42))
        b = augment(pair, cfg, np.random.default_rng(42))
        np.testing.assert_array_equal(a.hazy, b.hazy)
        np.testing.assert_array_equal(a.clean, b.clean)

    def test_pair_geometry_never_desynchronizes(self):
        pair = coordinate_tagged_pair()
        cfg = AugmentationConfig(crop_size=16)
        for seed in range(25):
            out = augment(pair, cfg, np.random.default_rng(seed))
            assert out.hazy.shape == (16, 16, 3)
            # channels 0/1 carry source coordinates: they must agree
            # exactly between the two augmented images
            np.testing.assert_array_equal(out.hazy[:, :, :2], out.clean[:, :, :2])
            np.testing.assert_allclose(out.clean[:, :, 2], 1.0)

    def test_rotation_of_rectangular_source(self):
        pair = coordinate_tagged_pair(h=20, w=40)
        cfg = AugmentationConfig(rotations=(90,), hflip=False, vflip=False, crop_size=20)
        out = augment(pair, cfg, np.random.default_rng(1))
        assert out.hazy.shape == (20, 20, 3)

    def test_crop_larger_than_image(self, rng):
        img = rng.random((16, 16, 3)).astype(np.float32)
        pair = ImagePair(hazy=img, clean=img.copy(), id="x")
        with pytest.raises(DimensionError):
            augment(pair, AugmentationConfig(crop_size=32), np.random.default_rng(0))


class TestGamma:
    def test_identity_at_one(self, rng):
        img = rng.random((8, 8, 3))
        np.testing.assert_array_equal(gamma_correct(img, 1.0), img)

    def test_square_root_case(self):
        img = np.full((4, 4, 3), 0.25)
        np.testing.assert_allclose(gamma_correct(img, 0.5), 0.5)

    def test_065_brightens(self, rng):
        img = rng.random((16, 16, 3))
        out = gamma_correct(img, 0.65)
        assert np.all(out >= img)
        assert out.max() <= 1.0

    def test_nonpositive_gamma(self, rng):
        with pytest.raises(ValueError):
            gamma_correct(rng.random((4, 4, 3)), 0.0)

    def test_pair_apply_to_flag(self, rng):
        img = rng.random((8, 8, 3)).astype(np.float32)
        pair = ImagePair(hazy=img, clean=img.copy(), id="x")
        out = gamma_correct_pair(pair, 0.65, apply_to="hazy")
        assert np.all(out.hazy >= img)
        np.testing.assert_array_equal(out.clean, img)
        both = gamma_correct_pair(pair, 0.65, apply_to="both")
        assert np.all(both.clean >= img)


class TestBatchIterator:
    def make_dataset(self, n=20):
        rng = np.random.default_rng(0)
        out = []
        for i in range(n):
            img = rng.random((32, 32, 3)).astype(np.float32)
            out.append(ImagePair(hazy=img, clean=img.copy(), id=f"p{i:02d}"))
        return out

    def test_batch_count(self):
        ds = self.make_dataset(20)
        cfg = AugmentationConfig(crop_size=16)
        batches = list(batch_iterator(ds, cfg, batch_size=4, epoch_seed=0))
        assert len(batches) == 5
        assert all(len(b) == 4 for b in batches)

    def test_partial_final_batch_included(self):
        ds = self.make_dataset(10)
        cfg = AugmentationConfig(crop_size=16)
        batches = list(batch_iterator(ds, cfg, batch_size=4, epoch_seed=0))
        assert [len(b) for b in batches] == [4, 4, 2]

    def test_same_seed_identical_sequence(self):
        ds = self.make_dataset(8)
        cfg = AugmentationConfig(crop_size=16)
        a = list(batch_iterator(ds, cfg, batch_size=3, epoch_seed=5))
        b = list(batch_iterator(ds, cfg, batch_size=3, epoch_seed=5))
        for ba, bb in zip(a, b):
            for pa, pb in zip(ba, bb):
                assert pa.id == pb.id
                np.testing.assert_array_equal(pa.hazy, pb.hazy)

    def test_epoch_is_a_permutation(self):
        ds = self.make_dataset(11)
        cfg = AugmentationConfig(crop_size=16)
        seen = [p.id for b in batch_iterator(ds, cfg, batch_size=4, epoch_seed=3) for p in b]
        assert sorted(seen) == sorted(p.id for p in ds)
        assert len(seen) == len(set(seen))

    def test_bad_batch_size(self):
        with pytest.raises(ConfigError):
            next(batch_iterator(self.make_dataset(4), AugmentationConfig(crop_size=16), 0, 0))


class TestSyntheticPairs:
    def test_deterministic_and_aligned(self):
        a = synthetic_pairs(3, size=(48, 48), seed=11)
        b = synthetic_pairs(3, size=(48, 48), seed=11)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.hazy, pb.hazy)
            assert pa.hazy.shape == pa.clean.shape == (48, 48, 3)

    def test_haze_actually_degrades(self):
        from duohaze.eval import psnr

        pairs = synthetic_pairs(4, size=(64, 64), seed=2)
        for p in pairs:
            assert psnr(p.hazy, p.clean) < 35.0
