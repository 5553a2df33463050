"""Synthetic colour scenes shared by the transform and acceptance tests."""
import numpy as np

from mmsldl.transforms import ImagePlane


def lit_scene(seed, h=32, w=32):
    """Block reflectances under a horizontally varying illuminant colour, intensities in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    blocks = rng.uniform(0.35, 0.8, size=(4, 4, 3))
    refl = np.repeat(np.repeat(blocks, h // 4, 0), w // 4, 1)
    t = np.linspace(-1, 1, w)[None, :, None] * np.ones((h, 1, 1))
    return ImagePlane(np.clip(refl * np.exp(t * np.array([0.25, 0.0, -0.25])), 0.1, 0.9))


def shadow_pair(seed, h=32, w=32):
    """Left half lit; right half the same reflectances with every channel scaled by 0.5."""
    rng = np.random.default_rng(seed)
    half = np.repeat(np.repeat(rng.uniform(0.25, 0.9, size=(h // 8, w // 16, 3)), 8, 0), 8, 1)
    return ImagePlane(np.concatenate([half, 0.5 * half], axis=1))
