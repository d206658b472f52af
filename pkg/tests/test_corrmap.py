import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from sidforge.corrmap import corr_summary, local_correlation_map


@pytest.mark.parametrize("window, rho", [
    ([[0, 1], [0, 1]], 0.0),
    ([[0, 1], [1, 2]], 1.0),
    ([[1, 0], [0, 1]], 0.0),
    ([[1, 0], [2, 1]], -1.0),
])
def test_hand_windows(window, rho):
    assert local_correlation_map(np.array(window, float)).tolist() == [[rho]]


def test_constant_image_gives_zero_map():
    assert np.all(local_correlation_map(np.full((5, 7), 0.3)) == 0.0)


@pytest.mark.parametrize("w", [2, 3, 4])
@pytest.mark.parametrize("seed", range(6))
def test_matches_bruteforce_oracle(w, seed):
    rng = np.random.default_rng(seed)
    h, wd = rng.integers(w, 9, size=2)
    img = rng.random((h, wd))
    if seed % 2:
        # quantised levels produce genuine ties and degenerate windows
        img = np.round(img * 3) / 3
    out = local_correlation_map(img, w)
    assert out.shape == (h - w + 1, wd - w + 1)
    np.testing.assert_allclose(out, oracles.pearson_corr_map(img, w), atol=1e-9, rtol=0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 8), st.integers(2, 8)), elements=st.floats(0, 1)))
def test_w2_values_are_signs(img):
    out = local_correlation_map(img)
    assert set(np.unique(out)) <= {-1.0, 0.0, 1.0}


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(4, 8), st.integers(4, 8)), elements=st.floats(0, 1)),
    st.sampled_from([2, 3, 4]),
)
def test_values_bounded_and_finite(img, w):
    out = local_correlation_map(img, w)
    assert np.all(np.isfinite(out))
    assert np.all(np.abs(out) <= 1.0)


@pytest.mark.parametrize("a, b", [(2.0, 0.0), (0.25, 0.5), (3.7, -1.2)])
def test_affine_invariance(a, b):
    img = np.round(np.random.default_rng(7).random((8, 8)) * 255) / 255
    np.testing.assert_array_equal(local_correlation_map(a * img + b), local_correlation_map(img))
    for w in (3, 4):
        np.testing.assert_allclose(local_correlation_map(a * img + b, w), local_correlation_map(img, w), atol=1e-9)


def test_color_input_uses_luma():
    rgb = np.random.default_rng(8).random((3, 6, 6))
    gray = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]
    np.testing.assert_array_equal(local_correlation_map(rgb), local_correlation_map(gray))


@pytest.mark.parametrize("shape, w", [((4, 4), 1), ((3, 5), 4), ((5, 2), 3)])
def test_rejects_bad_window(shape, w):
    with pytest.raises(ValueError):
        local_correlation_map(np.zeros(shape), w)


def test_summary_trivial_maps():
    assert corr_summary(np.zeros((4, 4))) == (0.0, (0.0, 1.0, 0.0))
    assert corr_summary(np.ones((3, 5))) == (1.0, (0.0, 0.0, 1.0))


def test_summary_counts_match_direct_counting():
    m = np.random.default_rng(9).integers(-1, 2, size=(13, 11)).astype(float)
    mean, (neg, zero, pos) = corr_summary(m)
    values = m.ravel().tolist()
    assert neg == values.count(-1.0) / len(values)
    assert zero == pytest.approx(values.count(0.0) / len(values), abs=1e-15)
    assert pos == values.count(1.0) / len(values)
    assert mean == pytest.approx(sum(values) / len(values), abs=1e-15)
    assert neg + zero + pos == pytest.approx(1.0, abs=1e-15)
