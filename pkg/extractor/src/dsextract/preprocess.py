"""Image loading shared by every backbone.

Images are decoded to RGB, uniformly scaled to 224x224 with bilinear
interpolation, mapped to [0, 1], and standardized channel-wise with the
usual large-scale vision training statistics (mean 0.485/0.456/0.406,
std 0.229/0.224/0.225). Output is CHW float32. Inference only: there is no
augmentation, so a given file always produces the same tensor.
"""

import numpy as np
from PIL import Image

IMAGE_SIZE = 224
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)


def load_image(path: str) -> np.ndarray:
    """One image file -> standardized (3, 224, 224) float32 tensor."""
    with Image.open(path) as im:
        rgb = im.convert("RGB").resize((IMAGE_SIZE, IMAGE_SIZE), Image.Resampling.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / np.float32(255.0)
    arr = (arr - CHANNEL_MEAN) / CHANNEL_STD
    return arr.transpose(2, 0, 1)


def load_batch(paths: list[str]) -> np.ndarray:
    """Stack of standardized image tensors, (n, 3, 224, 224) float32."""
    if not paths:
        raise ValueError("empty image batch")
    return np.stack([load_image(p) for p in paths])
