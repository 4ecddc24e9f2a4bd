import numpy as np
import pytest
import torch


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def rel_error(analytic, numeric):
    """Norm-based relative error between two gradient arrays."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def random_image(rng, h, w, dtype=np.float64):
    return rng.random((h, w, 3)).astype(dtype)
