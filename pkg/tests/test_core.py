import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nsa_forge.core import (
    Rect,
    RngStream,
    as_image,
    background_mask,
    median_filter,
    object_mask,
    resize_bilinear,
    resize_nearest,
)

unit_maps = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.floats(0, 1))


def test_object_mask_uniform_background():
    img = np.full((4, 4, 3), 200 / 255)
    assert not object_mask(img, 200, 60).any()


def test_object_mask_threshold_rule():
    img = (np.array([[200, 200], [90, 90]]) / 255.0)[:, :, None]
    np.testing.assert_array_equal(object_mask(img, 200, 60), [[False, False], [True, True]])


def test_object_mask_uses_channel_mean():
    img = np.zeros((1, 1, 3))
    img[0, 0] = np.array([255, 0, 0]) / 255  # mean 85
    assert object_mask(img, 200, 60)[0, 0]
    assert not object_mask(img, 85, 1)[0, 0]


@pytest.mark.parametrize("b,t", [(-1, 10), (256, 10), (10, 300)])
def test_object_mask_rejects_out_of_range_constants(b, t):
    with pytest.raises(ValueError):
        object_mask(np.zeros((2, 2, 1)), b, t)


@given(unit_maps, st.integers(0, 255), st.integers(0, 255))
def test_object_mask_complements_background(m, b, t):
    img = m[:, :, None]
    obj = object_mask(img, b, t)
    bg = background_mask(img, b, t)
    assert np.all(obj ^ bg)


def test_median_window_one_is_identity():
    m = np.random.default_rng(0).random((5, 7))
    np.testing.assert_array_equal(median_filter(m, 1), m)


def test_median_removes_isolated_spike():
    m = np.zeros((3, 3))
    m[1, 1] = 1
    np.testing.assert_array_equal(median_filter(m, 3), np.zeros((3, 3)))


@pytest.mark.parametrize("window", [0, 2, 4, -1, 2.5])
def test_median_rejects_bad_window(window):
    with pytest.raises(ValueError):
        median_filter(np.zeros((3, 3)), window)


@given(unit_maps, st.sampled_from([1, 3, 5]))
def test_median_preserves_range(m, window):
    out = median_filter(m, window)
    assert out.min() >= m.min() and out.max() <= m.max()


def test_median_constant():
    np.testing.assert_array_equal(median_filter(np.full((6, 6), 0.3), 5), np.full((6, 6), 0.3))


def test_resize_identity_dims():
    img = np.random.default_rng(1).random((5, 6, 3))
    np.testing.assert_array_equal(resize_bilinear(img, 6, 5), img)


def test_resize_two_pixel_row_is_monotone():
    row = np.array([[0.0, 1.0]])
    out = resize_bilinear(row, 4, 1)
    assert out.shape == (1, 4)
    assert np.all(np.diff(out[0]) >= 0)
    np.testing.assert_allclose(out[0], [0.0, 0.25, 0.75, 1.0])


def test_resize_rejects_zero_size():
    with pytest.raises(ValueError):
        resize_bilinear(np.zeros((3, 3)), 0, 3)


@given(st.floats(0, 1), st.integers(1, 20), st.integers(1, 20), st.integers(1, 20), st.integers(1, 20))
def test_resize_preserves_constants(c, h, w, nh, nw):
    out = resize_bilinear(np.full((h, w, 3), c), nw, nh)
    assert out.shape == (nh, nw, 3)
    assert np.all(out == c)


@given(unit_maps, st.integers(1, 25), st.integers(1, 25))
def test_resize_stays_in_unit_range(m, nw, nh):
    out = resize_bilinear(m, nw, nh)
    assert out.min() >= 0 and out.max() <= 1


def test_resize_nearest_block_upsampling():
    m = np.array([[True, False], [False, True]])
    np.testing.assert_array_equal(resize_nearest(m, 4, 4), np.kron(m, np.ones((2, 2), dtype=bool)))


def test_as_image_promotes_and_clips():
    img = as_image(np.array([[1.5, -0.2]]))
    assert img.shape == (1, 2, 1)
    assert img.min() == 0 and img.max() == 1
    with pytest.raises(ValueError):
        as_image(np.zeros((2, 2, 2)))


@given(
    st.floats(0, 1), st.floats(0, 1), st.floats(0.001, 1), st.floats(0.001, 1), st.integers(1, 300), st.integers(1, 300)
)
def test_rect_pixels_always_in_bounds(cx, cy, wf, hf, width, height):
    x0, y0, w, h = Rect(cx, cy, wf, hf).to_pixels(width, height)
    assert 1 <= w <= width and 1 <= h <= height
    assert 0 <= x0 and x0 + w <= width
    assert 0 <= y0 and y0 + h <= height


def test_rect_rounding_rule():
    # width 0.25 * 10 = 2.5 rounds half up to 3; left = round(5 - 1.5) = 4
    assert Rect(0.5, 0.5, 0.25, 0.5).to_pixels(10, 10) == (4, 3, 3, 5)
    # clamped against the right edge
    assert Rect(0.99, 0.5, 0.4, 0.2).to_pixels(10, 10) == (6, 4, 4, 2)


def test_rect_from_pixels_round_trip():
    assert Rect.from_pixels(3, 5, 7, 4, 32, 20).to_pixels(32, 20) == (3, 5, 7, 4)


def test_rng_reproducible():
    a, b = RngStream(42), RngStream(42)
    seq_a = [a.uniform(0, 1), a.gamma(2, 0.1), a.normal(1, 0.25), int(a.integers(0, 100))]
    seq_b = [b.uniform(0, 1), b.gamma(2, 0.1), b.normal(1, 0.25), int(b.integers(0, 100))]
    assert seq_a == seq_b
    assert a.counter == 4


def test_rng_derived_streams_differ_and_repeat():
    s1 = RngStream.derive_seed(7, 0)
    s2 = RngStream.derive_seed(7, 1)
    assert s1 != s2
    assert s1 == RngStream.derive_seed(7, 0)
    assert RngStream.derive_seed(7, 0, 1) != s1
    assert 0 <= s1 < 2**64


def test_rng_frozen_values():
    # guards against silent changes of the generator across library upgrades
    rng = RngStream(2024)
    assert RngStream.derive_seed(7, 0, 0) == 13432090166537452992
    np.testing.assert_allclose(rng.uniform(0, 1, 3), [0.27061294, 0.61898352, 0.03871437], atol=1e-8)


@settings(max_examples=25)
@given(st.integers(0, 2**64 - 1))
def test_rng_accepts_full_64bit_range(seed):
    assert RngStream(seed).random() < 1
