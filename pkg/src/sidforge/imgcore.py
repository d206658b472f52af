"""Image representation, codec I/O, luma conversion and resampling.

Images are plain ``numpy`` arrays of dtype float64 laid out channel-planar as
``(C, H, W)`` with samples in [0, 1]. Single-channel "gray" images used by the
correlation analysis are 2-D ``(H, W)`` arrays.
"""
from __future__ import annotations

import io
import os
import struct

import numpy as np
from PIL import Image, UnidentifiedImageError

__all__ = [
    "ImageDecodeError",
    "as_image",
    "decode_image",
    "encode_png",
    "read_image",
    "write_png",
    "to_gray",
    "bilinear_resize",
    "nearest_resize",
    "dumps_sidt",
    "loads_sidt",
    "write_sidt",
    "read_sidt",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

SIDT_MAGIC = b"SIDT"
SIDT_VERSION = 1
_SIDT_HEADER = struct.Struct("<4sIIII")


class ImageDecodeError(ValueError):
    """Raised when an encoded image stream cannot be decoded."""

    def __init__(self, stage: str, detail: str, nbytes: int | None = None):
        self.stage = stage
        self.nbytes = nbytes
        where = f" ({nbytes} bytes)" if nbytes is not None else ""
        super().__init__(f"decode failed at stage '{stage}'{where}: {detail}")


def as_image(x) -> np.ndarray:
    """Coerce ``x`` to a ``(C, H, W)`` float64 array, promoting 2-D input to C=1."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise ValueError(f"expected (C, H, W) or (H, W) array, got shape {arr.shape}")
    return arr


def decode_image(data: bytes) -> np.ndarray:
    """Decode a PNG or baseline JPEG byte stream.

    8-bit samples map to ``value / 255``. Gray streams decode to C=1, colour
    streams to C=3 (alpha is dropped, palettes are expanded).

    Raises
    ------
    ImageDecodeError
        If the stream is not a recognised image, is truncated or uses an
        unsupported sample format.
    """
    nbytes = len(data)
    try:
        img = Image.open(io.BytesIO(data))
    except UnidentifiedImageError as exc:
        raise ImageDecodeError("header", str(exc), nbytes) from exc
    if img.format not in ("PNG", "JPEG"):
        raise ImageDecodeError("header", f"unsupported format {img.format}", nbytes)
    try:
        img.load()
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError("pixels", str(exc), nbytes) from exc

    mode = img.mode
    if mode in ("L", "1"):
        img = img.convert("L")
    elif mode == "LA":
        img = img.convert("L")
    elif mode in ("RGB", "RGBA", "P", "PA"):
        img = img.convert("RGB")
    else:
        raise ImageDecodeError("mode", f"unsupported sample mode {mode}", nbytes)

    arr = np.asarray(img, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        return arr[None]
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def _to_uint8(x: np.ndarray) -> np.ndarray:
    x = as_image(x)
    q = np.round(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)
    if q.shape[0] == 1:
        return q[0]
    if q.shape[0] == 3:
        return q.transpose(1, 2, 0)
    raise ValueError(f"cannot encode {q.shape[0]}-channel image")


def encode_png(x: np.ndarray) -> bytes:
    """Encode an image as 8-bit PNG (samples are rounded to the nearest level)."""
    buf = io.BytesIO()
    Image.fromarray(_to_uint8(x)).save(buf, format="PNG")
    return buf.getvalue()


def read_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def write_png(path: str | os.PathLike, x: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_png(x))


def to_gray(x: np.ndarray) -> np.ndarray:
    """Luma of a ``(C, H, W)`` image as an ``(H, W)`` array (BT.601 weights)."""
    x = as_image(x)
    if x.shape[0] == 1:
        return x[0].copy()
    if x.shape[0] == 3:
        r, g, b = LUMA_WEIGHTS
        return r * x[0] + g * x[1] + b * x[2]
    raise ValueError(f"to_gray supports 1 or 3 channels, got {x.shape[0]}")


def _bilinear_axis(n_in: int, n_out: int):
    # half-pixel centres, edge clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def bilinear_resize(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling with the half-pixel-centre (align_corners=False) grid.

    Output pixel ``i`` samples source coordinate ``(i + 0.5) * H / out_h - 0.5``,
    clamped to the image. Resizing to the input size returns an exact copy.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1")
    x = as_image(x)
    _, h, w = x.shape
    r0, r1, fr = _bilinear_axis(h, out_h)
    c0, c1, fc = _bilinear_axis(w, out_w)
    fr = fr[None, :, None]
    rows = x[:, r0, :] * (1.0 - fr) + x[:, r1, :] * fr
    fc = fc[None, None, :]
    return rows[:, :, c0] * (1.0 - fc) + rows[:, :, c1] * fc


def _nearest_axis(n_in: int, n_out: int) -> np.ndarray:
    # nearest to (i + 0.5) * n_in / n_out - 0.5, ties toward the smaller index:
    # idx = ceil(src - 0.5) evaluated in exact integer arithmetic.
    num = (2 * np.arange(n_out) + 1) * n_in - 2 * n_out
    den = 2 * n_out
    idx = -((-num) // den)
    return np.clip(idx, 0, n_in - 1)


def nearest_resize(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resampling on the same half-pixel grid as :func:`bilinear_resize`."""
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1")
    x = as_image(x)
    _, h, w = x.shape
    return x[:, _nearest_axis(h, out_h)][:, :, _nearest_axis(w, out_w)]


# -- SIDT tensor dumps ------------------------------------------------------


def dumps_sidt(x: np.ndarray) -> bytes:
    """Serialise a ``(C, H, W)`` array: magic, u32 version/C/H/W, then LE float32 samples."""
    x = as_image(x)
    c, h, w = x.shape
    header = _SIDT_HEADER.pack(SIDT_MAGIC, SIDT_VERSION, c, h, w)
    return header + np.ascontiguousarray(x, dtype="<f4").tobytes()


def loads_sidt(data: bytes) -> np.ndarray:
    if len(data) < _SIDT_HEADER.size:
        raise ValueError("SIDT stream shorter than header")
    magic, version, c, h, w = _SIDT_HEADER.unpack_from(data)
    if magic != SIDT_MAGIC:
        raise ValueError(f"bad SIDT magic {magic!r}")
    if version != SIDT_VERSION:
        raise ValueError(f"unsupported SIDT version {version}")
    expected = _SIDT_HEADER.size + 4 * c * h * w
    if len(data) != expected:
        raise ValueError(f"SIDT payload size {len(data)} != expected {expected}")
    body = np.frombuffer(data, dtype="<f4", offset=_SIDT_HEADER.size)
    return body.reshape(c, h, w).astype(np.float64)


def write_sidt(path: str | os.PathLike, x: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_sidt(x))


def read_sidt(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads_sidt(fh.read())
