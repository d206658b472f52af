import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from sidforge.imgcore import (
    ImageDecodeError,
    bilinear_resize,
    decode_image,
    dumps_sidt,
    encode_png,
    loads_sidt,
    nearest_resize,
    to_gray,
)


def _png(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def test_decode_white_pixel():
    x = decode_image(_png(np.full((1, 1, 3), 255, np.uint8)))
    assert x.shape == (3, 1, 1)
    assert np.all(x == 1.0)


def test_decode_linear_8bit_mapping():
    x = decode_image(_png(np.array([[0, 85], [170, 255]], np.uint8)))
    assert x.shape == (1, 2, 2)
    np.testing.assert_allclose(x[0], [[0, 1 / 3], [2 / 3, 1]], atol=1e-6)


def test_decode_truncated_stream():
    data = _png(np.random.default_rng(0).integers(0, 256, (32, 32, 3), dtype=np.uint8))
    with pytest.raises(ImageDecodeError) as err:
        decode_image(data[: len(data) // 2])
    assert err.value.stage in {"header", "pixels"}


def test_decode_garbage():
    with pytest.raises(ImageDecodeError, match="header"):
        decode_image(b"not an image at all")


def test_decode_jpeg():
    buf = io.BytesIO()
    Image.fromarray(np.full((8, 8, 3), 128, np.uint8)).save(buf, format="JPEG", quality=95)
    x = decode_image(buf.getvalue())
    assert x.shape == (3, 8, 8)
    np.testing.assert_allclose(x, 128 / 255, atol=2 / 255)


def test_decode_rgba_drops_alpha():
    arr = np.zeros((2, 2, 4), np.uint8)
    arr[..., 0] = 255
    arr[..., 3] = 10
    x = decode_image(_png(arr))
    assert x.shape == (3, 2, 2)
    assert np.all(x[0] == 1.0) and np.all(x[1:] == 0.0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.uint8, st.tuples(st.sampled_from([1, 3]), st.integers(1, 9), st.integers(1, 9))))
def test_png_roundtrip_is_bit_identical(levels):
    x = levels / 255.0
    once = decode_image(encode_png(x))
    assert np.array_equal(once, x)
    assert np.array_equal(decode_image(encode_png(once)), once)


def test_to_gray_weights():
    gray = np.full((3, 2, 2), 0.4)
    np.testing.assert_allclose(to_gray(gray), 0.4, atol=1e-15)
    red = np.zeros((3, 1, 1))
    red[0] = 1.0
    assert to_gray(red)[0, 0] == pytest.approx(0.299)
    one = np.random.default_rng(1).random((1, 3, 3))
    assert np.array_equal(to_gray(one), one[0])


def test_to_gray_rejects_four_channels():
    with pytest.raises(ValueError):
        to_gray(np.zeros((4, 2, 2)))


def _bilinear_oracle(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = img.shape
    out = np.empty((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            sy = min(max((i + 0.5) * h / out_h - 0.5, 0.0), h - 1)
            sx = min(max((j + 0.5) * w / out_w - 0.5, 0.0), w - 1)
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, h - 1), min(x0 + 1, w - 1)
            ty, tx = sy - y0, sx - x0
            out[i, j] = ((1 - ty) * ((1 - tx) * img[y0, x0] + tx * img[y0, x1])
                         + ty * ((1 - tx) * img[y1, x0] + tx * img[y1, x1]))
    return out


def test_bilinear_identity():
    x = np.random.default_rng(2).random((3, 5, 7))
    assert np.array_equal(bilinear_resize(x, 5, 7), x)


def test_bilinear_2x2_to_4x4_matches_oracle():
    x = np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_allclose(bilinear_resize(x, 4, 4)[0], _bilinear_oracle(x, 4, 4), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(0, 1)),
    st.integers(1, 8),
    st.integers(1, 8),
)
def test_bilinear_matches_oracle_random(img, out_h, out_w):
    np.testing.assert_allclose(bilinear_resize(img, out_h, out_w)[0],
                               _bilinear_oracle(img, out_h, out_w), atol=1e-6)


@pytest.mark.parametrize("resize", [bilinear_resize, nearest_resize])
@pytest.mark.parametrize("size", [(1, 1), (3, 11), (16, 9)])
def test_resize_constant_stays_constant(resize, size):
    x = np.full((3, 6, 6), 0.37)
    out = resize(x, *size)
    assert out.shape == (3, *size)
    assert np.max(np.abs(out - 0.37)) <= 1e-6


def test_nearest_identity_and_block_replication():
    x = np.random.default_rng(3).random((1, 2, 2))
    assert np.array_equal(nearest_resize(x, 2, 2), x)
    up = nearest_resize(x, 4, 4)[0]
    assert np.array_equal(up, np.kron(x[0], np.ones((2, 2))))


def test_nearest_ties_go_to_smaller_index():
    # 2 -> 3: output 1 samples source coordinate 0.5 exactly
    x = np.array([[[0.0, 1.0]]])
    assert np.array_equal(nearest_resize(x, 1, 3)[0, 0], [0.0, 0.0, 1.0])


def test_resize_rejects_empty():
    with pytest.raises(ValueError):
        bilinear_resize(np.zeros((1, 2, 2)), 0, 2)


def test_sidt_roundtrip_and_layout():
    x = np.arange(24, dtype=np.float64).reshape(2, 3, 4) / 7
    blob = dumps_sidt(x)
    assert blob[:4] == b"SIDT"
    assert np.frombuffer(blob[4:20], "<u4").tolist() == [1, 2, 3, 4]
    assert len(blob) == 20 + 4 * 24
    np.testing.assert_array_equal(loads_sidt(blob), x.astype(np.float32))


@pytest.mark.parametrize("mutate", [lambda b: b"XXXX" + b[4:], lambda b: b[:-1], lambda b: b[:10]])
def test_sidt_rejects_corrupt(mutate):
    with pytest.raises(ValueError):
        loads_sidt(mutate(dumps_sidt(np.zeros((1, 2, 2)))))
