"""Image loading, saving and array/tensor conversion.

Images are exchanged as H x W x 3 float arrays with values in [0, 1]
(sRGB semantics). Network code uses C x H x W torch tensors; the two
helpers below convert between the conventions.
"""

import numpy as np
import torch
from PIL import Image


def load_image(path):
    """Decode an 8-bit image file to a float32 H x W x 3 array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return arr


def save_image(path, image):
    """Write a [0, 1] float H x W x 3 array as an 8-bit PNG."""
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    data = np.rint(arr * 255.0).astype(np.uint8)
    Image.fromarray(data).save(path)


def to_tensor(image, dtype=torch.float32):
    """H x W x 3 array in [0, 1] -> 3 x H x W tensor."""
    arr = np.ascontiguousarray(np.asarray(image))
    return torch.from_numpy(arr).permute(2, 0, 1).to(dtype)


def to_image(tensor):
    """3 x H x W (or 1 x 3 x H x W) tensor -> H x W x 3 float32 array."""
    t = tensor.detach()
    if t.dim() == 4:
        if t.shape[0] != 1:
            raise ValueError(f"expected a single image, got batch of {t.shape[0]}")
        t = t[0]
    return t.permute(1, 2, 0).cpu().numpy().astype(np.float32)


def batch_to_tensor(images, dtype=torch.float32):
    """List of H x W x 3 arrays -> B x 3 x H x W tensor."""
    return torch.stack([to_tensor(im, dtype=dtype) for im in images], dim=0)
