"""Contiguous block occlusion with an unrelated patch image."""
import numpy as np
from PIL import Image

from ..errors import InvalidInputError, InvalidParameterError
from ..transforms import ImagePlane, to_grayscale


def block_side(height, width, fraction):
    """Side of a square covering ``fraction`` of the image area, capped at the short edge."""
    return int(min(height, width, round(np.sqrt(fraction * height * width))))


def _fit_patch(patch, side, channels):
    px = patch.pixels
    if channels == 1 and patch.channels == 3:
        px = to_grayscale(patch)
    elif channels == 3 and patch.channels == 1:
        px = np.repeat(px[..., None], 3, axis=2)
    mode = "F"
    if px.ndim == 2:
        out = Image.fromarray(px.astype(np.float32), mode=mode).resize((side, side), Image.BILINEAR)
        return np.asarray(out, dtype=float)
    planes = [
        np.asarray(Image.fromarray(px[..., k].astype(np.float32), mode=mode).resize((side, side), Image.BILINEAR),
                   dtype=float)
        for k in range(3)
    ]
    return np.stack(planes, axis=-1)


def occlude(img, fraction, seed, patch):
    """Replace a uniformly placed square block of ``img`` by ``patch`` resized to the block."""
    if not 0.05 <= fraction <= 0.95:
        raise InvalidParameterError(f"occlusion fraction must lie in [0.05, 0.95], got {fraction}")
    if patch is None or patch.pixels.size == 0:
        raise InvalidInputError("occlusion patch is empty")
    rng = np.random.default_rng(seed)
    h, w = img.height, img.width
    side = block_side(h, w, fraction)
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    out = np.array(img.pixels, copy=True)
    out[top:top + side, left:left + side] = np.clip(_fit_patch(patch, side, img.channels), 0.0, 1.0)
    return ImagePlane(out)


def covered_fraction(height, width, fraction):
    s = block_side(height, width, fraction)
    return s * s / (height * width)
