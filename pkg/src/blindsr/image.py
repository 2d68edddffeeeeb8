"""Image representation, color transform, resampling and file I/O.

Images are numpy float64 arrays of shape (C, H, W) with C in {1, 3} and
values nominally in [0, 1].  Out-of-range values are permitted transiently
(noise, ringing); clamping happens only when saving.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage

__all__ = [
    "as_image",
    "load_image",
    "save_image",
    "rgb_to_y",
    "bicubic_resize",
    "modcrop",
]


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate and coerce an array to the (C, H, W) float64 image layout.

    2-D input is promoted to a single-channel image.
    """
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim == 2:
        a = a[None, :, :]
    if a.ndim != 3:
        raise ValueError(f"image must be 2-D or 3-D (C,H,W), got shape {a.shape}")
    c, h, w = a.shape
    if c not in (1, 3):
        raise ValueError(f"image must have 1 or 3 channels, got {c}")
    if h < 1 or w < 1:
        raise ValueError(f"image dims must be >= 1, got {h}x{w}")
    return np.ascontiguousarray(a)


def load_image(path: str) -> np.ndarray:
    """Load an 8/16-bit grayscale or 8-bit RGB raster, scaled into [0, 1].

    PNG (or any Pillow-readable lossless container) is supported for
    mode L (8-bit gray), RGB (8-bit color) and I;16 / I (16-bit gray).
    Files ending in ``.txt`` use the plain-text matrix format:
    first line "H W C", then H*W*C whitespace-separated floats,
    row-major, channel-last.
    """
    if path.endswith(".txt"):
        return _load_text(path)
    try:
        im = PILImage.open(path)
        im.load()
    except Exception as exc:
        raise IOError(f"cannot read image file {path!r}: {exc}") from exc
    if im.mode == "L":
        arr = np.asarray(im, dtype=np.float64) / 255.0
        return arr[None, :, :]
    if im.mode == "RGB":
        arr = np.asarray(im, dtype=np.float64) / 255.0
        return np.ascontiguousarray(arr.transpose(2, 0, 1))
    if im.mode in ("I;16", "I;16B", "I;16L"):
        arr = np.asarray(im, dtype=np.float64) / 65535.0
        return arr[None, :, :]
    if im.mode == "I":
        # Pillow promotes some 16-bit gray PNGs to 32-bit int mode.
        arr = np.asarray(im, dtype=np.float64)
        if arr.max() > 65535:
            raise IOError(f"{path!r}: unsupported bit depth (mode 'I', >16 bit)")
        return arr[None, :, :] / 65535.0
    raise IOError(
        f"{path!r}: unsupported mode {im.mode!r} "
        "(supported: 8-bit gray/RGB, 16-bit gray)"
    )


def save_image(img: np.ndarray, path: str) -> None:
    """Save as 8-bit raster: clamp to [0,1], quantize by round(v*255).

    Rounding is half-away-from-zero.  ``.txt`` paths use the plain-text
    matrix format instead (no quantization).
    """
    img = as_image(img)
    if path.endswith(".txt"):
        _save_text(img, path)
        return
    clamped = np.clip(img, 0.0, 1.0)
    # after clamping all values are >= 0, so floor(x+0.5) is half-away-from-zero
    codes = np.floor(clamped * 255.0 + 0.5).astype(np.uint8)
    if codes.shape[0] == 1:
        pil = PILImage.fromarray(codes[0], mode="L")
    else:
        pil = PILImage.fromarray(codes.transpose(1, 2, 0), mode="RGB")
    try:
        pil.save(path)
    except Exception as exc:
        raise IOError(f"cannot write image file {path!r}: {exc}") from exc


def _load_text(path: str) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise IOError(f"{path!r}: expected 'H W C' header, got {header}")
        h, w, c = (int(v) for v in header)
        data = np.loadtxt(fh, dtype=np.float64).reshape(h, w, c)
    return as_image(data.transpose(2, 0, 1))


def _save_text(img: np.ndarray, path: str) -> None:
    c, h, w = img.shape
    with open(path, "w") as fh:
        fh.write(f"{h} {w} {c}\n")
        np.savetxt(fh, img.transpose(1, 2, 0).reshape(h, w * c), fmt="%.17g")


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """BT.601 limited-range luma: Y = (16 + 65.481 R + 128.553 G + 24.966 B)/255.

    Input channels are in [0, 1]; output is a 1-channel image in
    [16/255, 235/255] for in-range input.
    """
    img = as_image(img)
    if img.shape[0] != 3:
        raise ValueError(f"rgb_to_y needs a 3-channel image, got {img.shape[0]}")
    r, g, b = img[0], img[1], img[2]
    y = (16.0 + 65.481 * r + 128.553 * g + 24.966 * b) / 255.0
    return y[None, :, :]


def _cubic_weight(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    """Keys cubic-convolution kernel with parameter a."""
    t = np.abs(t)
    w = np.zeros_like(t)
    near = t <= 1.0
    far = (t > 1.0) & (t < 2.0)
    w[near] = (a + 2.0) * t[near] ** 3 - (a + 3.0) * t[near] ** 2 + 1.0
    w[far] = a * t[far] ** 3 - 5.0 * a * t[far] ** 2 + 8.0 * a * t[far] - 4.0 * a
    return w


def _resample_matrix(n_in: int, n_out: int, scale: float) -> np.ndarray:
    """Dense 1-D cubic resampling operator (n_out x n_in), clamp-to-edge."""
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = (i + 0.5) / scale - 0.5
        base = int(np.floor(src))
        taps = np.arange(base - 1, base + 3)
        weights = _cubic_weight(src - taps)
        np.add.at(mat[i], np.clip(taps, 0, n_in - 1), weights)
    return mat


def bicubic_resize(img: np.ndarray, scale: float) -> np.ndarray:
    """Separable cubic-convolution resampling (a = -0.5, clamp-to-edge).

    Output dims are round(dim * scale).  Source coordinates follow the
    pixel-center convention src = (dst + 0.5)/scale - 0.5.
    """
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    img = as_image(img)
    c, h, w = img.shape
    h_out = int(np.floor(h * scale + 0.5))
    w_out = int(np.floor(w * scale + 0.5))
    if h_out < 1 or w_out < 1:
        raise ValueError(f"output would be {h_out}x{w_out} for scale {scale}")
    rows = _resample_matrix(h, h_out, scale)
    cols = _resample_matrix(w, w_out, scale)
    out = np.einsum("oh,chw,pw->cop", rows, img, cols, optimize=True)
    return np.ascontiguousarray(out)


def modcrop(img: np.ndarray, s: int) -> np.ndarray:
    """Crop bottom/right so height and width are multiples of s."""
    if s < 1:
        raise ValueError(f"scale must be >= 1, got {s}")
    img = as_image(img)
    _, h, w = img.shape
    if h < s or w < s:
        raise ValueError(f"image {h}x{w} smaller than scale {s}")
    return np.ascontiguousarray(img[:, : h - h % s, : w - w % s])
