import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mmsldl.errors import InvalidInputError
from mmsldl.transforms import (
    GrayscaleInputWarning,
    IlluminationInvariant,
    ImagePlane,
    LocalNormalization,
    RawPixels,
    entropy_of_projection,
    get_transform,
    illumination_invariant,
    invariant_angle,
    local_normalization,
    log_chromaticity,
    projection_entropy,
    to_grayscale,
    to_raw_vector,
    unstack_vector,
)

from images import lit_scene, shadow_pair

unit = st.floats(0, 1, allow_nan=False)
planes = st.tuples(st.integers(1, 9), st.integers(1, 9)).flatmap(lambda s: arrays(np.float64, s, elements=unit))


def test_image_plane_validation():
    with pytest.raises(InvalidInputError):
        ImagePlane(np.full((2, 2), 1.5))
    with pytest.raises(InvalidInputError):
        ImagePlane(np.zeros((0, 3)))
    with pytest.raises(InvalidInputError):
        ImagePlane(np.zeros((2, 2, 2)))
    assert ImagePlane(np.zeros((2, 2, 1))).channels == 1


def test_raw_vector_examples():
    assert np.array_equal(to_raw_vector(ImagePlane(np.array([[0, 1], [0.5, 0.25]]))), [0, 0.5, 1, 0.25])
    assert np.all(to_raw_vector(ImagePlane(np.full((3, 4), 0.3))) == 0.3)
    rgb = np.zeros((1, 1, 3))
    rgb[0, 0] = [1, 0, 0]
    assert to_raw_vector(ImagePlane(rgb))[0] == pytest.approx(0.299)


@given(planes)
def test_raw_vector_round_trip(px):
    img = ImagePlane(px)
    assert np.array_equal(unstack_vector(to_raw_vector(img), img.height, img.width), px)


@given(st.integers(0, 1000))
def test_raw_vector_isometry(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((5, 6)), rng.random((5, 6))
    # same multiset of squared differences, so the distance is identical up to summation order
    d_img = np.sort(((a - b) ** 2).ravel())
    d_vec = np.sort((to_raw_vector(ImagePlane(a)) - to_raw_vector(ImagePlane(b))) ** 2)
    assert np.array_equal(d_img, d_vec)


def test_unstack_size_check():
    with pytest.raises(InvalidInputError):
        unstack_vector(np.zeros(5), 2, 2)


def test_log_chromaticity_examples():
    gray = ImagePlane(np.full((2, 2, 3), 0.4))
    assert np.allclose(log_chromaticity(gray), 0)
    px = np.array([[[0.6, 0.3, 0.3]]])
    chi = log_chromaticity(ImagePlane(px), eps=1e-12)
    assert np.allclose(chi[0, 0], [np.log(2), 0], atol=1e-9)
    with pytest.raises(InvalidInputError):
        log_chromaticity(ImagePlane(np.zeros((2, 2))))


@given(st.floats(0.5, 2.0), st.integers(0, 1000))
def test_log_chromaticity_scale_invariance(s, seed):
    rng = np.random.default_rng(seed)
    px = rng.uniform(0.1, 0.45, size=(4, 4, 3))
    small = 1e-6
    a = log_chromaticity(ImagePlane(px), eps=small)
    b = log_chromaticity(ImagePlane(px * s), eps=small)
    assert np.max(np.abs(a - b)) < 1e-3
    # default eps: each log term moves by at most eps/min_intensity * |1 - 1/s|
    eps = 1 / 255
    a = log_chromaticity(ImagePlane(px))
    b = log_chromaticity(ImagePlane(px * s))
    assert np.max(np.abs(a - b)) <= 2 * eps / 0.1 * abs(1 - 1 / s) + 1e-12


def test_entropy_examples():
    assert entropy_of_projection(np.zeros((10, 2)), 0.3) == 0.0
    two = np.vstack([np.zeros((50, 2)), np.ones((50, 2))])
    assert projection_entropy(two[:, 0], percentiles=(0, 100)) == pytest.approx(np.log(2), abs=1e-6)


def test_entropy_minimum_orthogonal_to_spread():
    rng = np.random.default_rng(3)
    # chromaticities spread along the direction at 30 degrees; projecting on 120 degrees collapses them
    line = np.deg2rad(30)
    t = rng.uniform(-1, 1, 2000)
    chi = np.outer(t, [np.cos(line), np.sin(line)])
    chi += np.outer(rng.choice([-0.5, 0.5], 2000), [np.cos(line + np.pi / 2), np.sin(line + np.pi / 2)])
    theta, ent = invariant_angle(chi)
    assert np.rad2deg(theta) == pytest.approx(120, abs=1.0)
    assert ent.argmin() == int(round(np.rad2deg(theta)))


def test_invariant_examples():
    const = ImagePlane(np.tile([0.2, 0.5, 0.7], (5, 6, 1)))
    out = illumination_invariant(const).pixels
    assert out.shape == (5, 6) and np.ptp(out) == 0
    for s in range(5):
        out = illumination_invariant(lit_scene(s)).pixels
        assert out.min() >= 0 and out.max() <= 1


@pytest.mark.parametrize("seed", range(5))
def test_shadow_pair_collapses(seed):
    img = shadow_pair(seed)
    inv = illumination_invariant(img).pixels
    g = to_grayscale(img)
    w = img.width // 2
    assert abs(inv[:, :w].mean() - inv[:, w:].mean()) < 0.05
    assert abs(g[:, :w].mean() - g[:, w:].mean()) > 0.2


@pytest.mark.parametrize("seed", range(8))
def test_global_scaling_invariance(seed):
    img = lit_scene(seed)
    a = illumination_invariant(img).pixels
    b = illumination_invariant(img.scaled(0.8)).pixels
    assert np.max(np.abs(a - b)) < 0.02


def test_invariant_deterministic_bytes():
    img = lit_scene(1)
    assert illumination_invariant(img).pixels.tobytes() == illumination_invariant(img).pixels.tobytes()


def test_grayscale_passthrough_warns():
    g = ImagePlane(np.full((3, 3), 0.5))
    with pytest.warns(GrayscaleInputWarning):
        assert illumination_invariant(g) is g


def test_local_normalization_range():
    rng = np.random.default_rng(0)
    out = local_normalization(ImagePlane(rng.random((12, 10)))).pixels
    assert out.shape == (12, 10) and out.min() == 0 and out.max() == 1


def test_transform_contract():
    rng = np.random.default_rng(0)
    color, gray = ImagePlane(rng.random((6, 5, 3))), ImagePlane(rng.random((6, 5)))
    for name in ("raw", "illumination_invariant", "local_normalization"):
        t = get_transform(name)
        for img in (color, gray):
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                v = t(img)
            assert v.shape == (t.output_dim(6, 5),) and np.array_equal(v, t(img))
    with pytest.raises(InvalidInputError):
        get_transform("wiener")


def test_invariant_transform_caches_and_falls_back():
    t = IlluminationInvariant()
    img = lit_scene(2)
    first = t.plane(img)
    assert t.plane(ImagePlane(img.pixels.copy())) is first
    gray = ImagePlane(np.random.default_rng(1).random((8, 8)))
    assert np.array_equal(t(gray), LocalNormalization()(gray))
    assert np.array_equal(RawPixels()(gray), to_raw_vector(gray))
