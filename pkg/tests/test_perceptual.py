"""Perceptual term: normalization contract, tap layout, weight loading."""

import numpy as np
import pytest
import torch
from torchvision.models import vgg16

from duohaze.errors import ConfigError
from duohaze.imgio import to_tensor
from duohaze.perceptual import (
    PerceptualConfig,
    PerceptualLoss,
    VggFeatureExtractor,
    feature_distance,
    perceptual_loss,
)


@pytest.fixture(scope="module")
def extractor():
    return VggFeatureExtractor(PerceptualConfig())


class TestFeatureDistance:
    def test_zero_at_equality(self):
        f = torch.rand(1, 8, 6, 6)
        assert float(feature_distance(f, f)) == 0.0

    def test_non_negative(self, rng):
        for _ in range(5):
            fa = torch.from_numpy(rng.standard_normal((1, 4, 5, 5)))
            fb = torch.from_numpy(rng.standard_normal((1, 4, 5, 5)))
            assert float(feature_distance(fa, fb)) >= 0.0

    def test_invariant_to_spatial_tiling(self, rng):
        """The 1/(C*H*W) normalization: doubling the spatial dims of an
        identical-content difference leaves the term unchanged."""
        fa = torch.from_numpy(rng.standard_normal((1, 4, 6, 6)))
        fb = torch.from_numpy(rng.standard_normal((1, 4, 6, 6)))
        big_a = fa.repeat_interleave(2, dim=-1).repeat_interleave(2, dim=-2)
        big_b = fb.repeat_interleave(2, dim=-1).repeat_interleave(2, dim=-2)
        small = float(feature_distance(fa, fb))
        large = float(feature_distance(big_a, big_b))
        assert small == pytest.approx(large, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            feature_distance(torch.rand(1, 4, 6, 6), torch.rand(1, 4, 3, 3))


class TestExtractor:
    def test_tap_channel_widths(self, extractor):
        taps = extractor(torch.rand(1, 3, 64, 64))
        assert [t.shape[1] for t in taps] == [64, 128, 256]

    def test_frozen(self, extractor):
        assert all(not p.requires_grad for p in extractor.parameters())
        extractor.train()
        assert not extractor.features.training

    def test_invalid_layer_id(self):
        with pytest.raises(ConfigError):
            PerceptualConfig(feature_layer_ids=(2, 99))

    def test_deterministic_fallback_init(self):
        a = VggFeatureExtractor(PerceptualConfig())
        b = VggFeatureExtractor(PerceptualConfig())
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)
        assert not a.pretrained

    def test_loads_published_layout_checkpoint(self, tmp_path):
        torch.manual_seed(5)
        donor = vgg16(weights=None)
        path = tmp_path / "vgg16.pth"
        torch.save(donor.state_dict(), path)
        ext = VggFeatureExtractor(PerceptualConfig(weights_path=str(path)))
        assert ext.pretrained
        assert torch.equal(ext.features[0].weight, donor.features[0].weight)


class TestPerceptualLoss:
    def test_zero_at_equality(self, extractor, rng):
        x = to_tensor(rng.random((32, 32, 3)).astype(np.float32))
        assert float(perceptual_loss(x, x, extractor)) == 0.0

    def test_non_negative(self, extractor, rng):
        a = to_tensor(rng.random((32, 32, 3)).astype(np.float32))
        b = to_tensor(rng.random((32, 32, 3)).astype(np.float32))
        assert float(perceptual_loss(a, b, extractor)) >= 0.0

    def test_wrapper_module(self, rng):
        pl = PerceptualLoss()
        a = to_tensor(rng.random((32, 32, 3)).astype(np.float32))
        assert float(pl.loss(a, a)) == 0.0
        assert not pl.pretrained
