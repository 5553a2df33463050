"""The two modality views: raw pixels and an illumination-invariant plane.

The invariant is the entropy-minimizing projection of 2-D log-chromaticity:
under a change of illuminant colour/intensity the chromaticities of one
surface move along a common direction, so projecting onto the direction
that minimizes the entropy of the projected values collapses that motion.
Grayscale inputs have no chromaticity and use a local log-contrast
normalization instead.
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .errors import InvalidInputError

LUMA = np.array([0.299, 0.587, 0.114])
DEFAULT_EPS = 1.0 / 255.0
N_BINS = 64
PERCENTILES = (5.0, 95.0)


class GrayscaleInputWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ImagePlane:
    """Row-major intensities in [0, 1]; shape (height, width) or (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] not in (1, 3)):
            raise InvalidInputError(f"image must be HxW or HxWx3, got shape {px.shape}")
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[..., 0]
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise InvalidInputError("image has an empty dimension")
        if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > 1:
            raise InvalidInputError("image intensities must be finite and within [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def channels(self):
        return 1 if self.pixels.ndim == 2 else 3

    def scaled(self, factor):
        return ImagePlane(np.clip(self.pixels * factor, 0.0, 1.0))


def to_grayscale(img):
    if img.channels == 1:
        return img.pixels
    return img.pixels @ LUMA


def to_raw_vector(img):
    """Column-major stacking of the grayscale plane."""
    return to_grayscale(img).ravel(order="F").copy()


def unstack_vector(v, height, width):
    v = np.asarray(v, dtype=float)
    if v.size != height * width:
        raise InvalidInputError(f"vector of length {v.size} cannot fill {height}x{width}")
    return v.reshape((height, width), order="F")


def log_chromaticity(img, eps=DEFAULT_EPS):
    """Per-pixel ``(log(R/G), log(B/G))`` with ``eps`` added to every channel."""
    if img.channels != 3:
        raise InvalidInputError("log-chromaticity needs a 3-channel image")
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    rgb = img.pixels + eps
    g = np.log(rgb[..., 1])
    return np.stack([np.log(rgb[..., 0]) - g, np.log(rgb[..., 2]) - g], axis=-1)


def _project(chroma, theta):
    chroma = np.asarray(chroma, dtype=float).reshape(-1, 2)
    return chroma @ np.array([np.cos(theta), np.sin(theta)])


def projection_entropy(values, bins=N_BINS, percentiles=PERCENTILES):
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise InvalidInputError("cannot take the entropy of an empty field")
    lo, hi = np.percentile(values, percentiles)
    if not hi > lo:
        return 0.0
    hist, _ = np.histogram(values, bins=bins, range=(lo, hi))
    p = hist[hist > 0] / hist.sum()
    return float(-np.sum(p * np.log(p)))


def entropy_of_projection(chroma_field, theta, bins=N_BINS, percentiles=PERCENTILES):
    """Shannon entropy (nats) of the chromaticities projected on angle ``theta``."""
    return projection_entropy(_project(chroma_field, theta), bins, percentiles)


def invariant_angle(chroma_field, step_deg=1.0, bins=N_BINS):
    thetas = np.deg2rad(np.arange(0.0, 180.0, step_deg))
    ent = np.array([entropy_of_projection(chroma_field, t, bins) for t in thetas])
    # argmin returns the first minimum, keeping the choice deterministic
    return float(thetas[int(np.argmin(ent))]), ent


def _minmax(plane):
    lo, hi = plane.min(), plane.max()
    if hi - lo <= 0:
        return np.zeros_like(plane)
    return (plane - lo) / (hi - lo)


def illumination_invariant(img, eps=DEFAULT_EPS, step_deg=1.0, bins=N_BINS):
    """Single-channel plane of the min-entropy chromaticity projection, scaled to [0, 1]."""
    if img.channels == 1:
        warnings.warn("grayscale input passed through unchanged", GrayscaleInputWarning, stacklevel=2)
        return img
    chi = log_chromaticity(img, eps)
    theta, _ = invariant_angle(chi, step_deg, bins)
    proj = _project(chi, theta).reshape(img.height, img.width)
    return ImagePlane(_minmax(proj))


def local_normalization(img, size=7, eps=DEFAULT_EPS):
    """Log intensity minus its ``size`` x ``size`` box average, scaled to [0, 1]."""
    logi = np.log(to_grayscale(img) + eps)
    return ImagePlane(_minmax(logi - uniform_filter(logi, size=size, mode="reflect")))


class ModalityTransform:
    """Maps an ImagePlane to a column vector of length ``output_dim(h, w)``."""

    name = "base"

    def output_dim(self, height, width):
        return height * width

    def plane(self, img):
        raise NotImplementedError

    def __call__(self, img):
        return self.plane(img).pixels.ravel(order="F").copy()


class RawPixels(ModalityTransform):
    name = "raw"

    def plane(self, img):
        return ImagePlane(to_grayscale(img))


class IlluminationInvariant(ModalityTransform):
    """Entropy-minimization invariant for colour input, local normalization for gray.

    Results are cached by image content.
    """

    name = "illumination_invariant"

    def __init__(self, eps=DEFAULT_EPS, step_deg=1.0, bins=N_BINS, box=7):
        self.eps, self.step_deg, self.bins, self.box = eps, step_deg, bins, box
        self._cache = {}

    def _key(self, img):
        h = hashlib.sha256(img.pixels.tobytes())
        h.update(repr((img.pixels.shape, self.eps, self.step_deg, self.bins, self.box)).encode())
        return h.hexdigest()

    def plane(self, img):
        key = self._key(img)
        if key not in self._cache:
            if img.channels == 3:
                out = illumination_invariant(img, self.eps, self.step_deg, self.bins)
            else:
                out = local_normalization(img, self.box, self.eps)
            self._cache[key] = out
        return self._cache[key]


class LocalNormalization(ModalityTransform):
    name = "local_normalization"

    def __init__(self, box=7, eps=DEFAULT_EPS):
        self.box, self.eps = box, eps

    def plane(self, img):
        return local_normalization(img, self.box, self.eps)


TRANSFORMS = {
    "raw": RawPixels,
    "illumination_invariant": IlluminationInvariant,
    "local_normalization": LocalNormalization,
}


def get_transform(name):
    try:
        return TRANSFORMS[name]()
    except KeyError:
        raise InvalidInputError(f"unknown modality transform {name!r}; choose from {sorted(TRANSFORMS)}") from None
