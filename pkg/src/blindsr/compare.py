"""Side-by-side labeled comparison grids for qualitative inspection."""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

from .image import _resample_matrix, as_image

__all__ = ["emit_comparison"]

GUTTER = 4
LABEL_BAND = 14


def _resize_to(img: np.ndarray, h: int, w: int) -> np.ndarray:
    rows = _resample_matrix(img.shape[1], h, h / img.shape[1])
    cols = _resample_matrix(img.shape[2], w, w / img.shape[2])
    return np.einsum("oh,chw,pw->cop", rows, img, cols, optimize=True)


def _label_band(text: str, width: int) -> np.ndarray:
    """White strip with the label drawn in black, as a (H, W) float array."""
    band = PILImage.new("L", (width, LABEL_BAND), color=255)
    ImageDraw.Draw(band).text((2, 1), text, fill=0)
    return np.asarray(band, dtype=np.float64) / 255.0


def emit_comparison(
    images: list[tuple[str, np.ndarray]],
    out_path: str,
    align: bool = False,
    inset: tuple[int, int, int, int] | None = None,
    zoom: int = 2,
) -> np.ndarray:
    """Write a labeled side-by-side grid; returns the grid image.

    All images must share dims; with align=True smaller/larger panels are
    bicubically resized to the first image's dims.  `inset` is a
    (top, left, height, width) rectangle whose `zoom`-times nearest-neighbor
    enlargement is appended under each panel.  Outside the gutters and
    label bands, panel pixels are copied from the sources untouched.
    """
    if len(images) < 2:
        raise ValueError(f"need at least 2 images to compare, got {len(images)}")
    labeled = [(label, as_image(img)) for label, img in images]
    channels = max(img.shape[0] for _, img in labeled)
    _, h, w = labeled[0][1].shape
    panels = []
    for label, img in labeled:
        if img.shape[1:] != (h, w):
            if not align:
                raise ValueError(
                    f"panel {label!r} has dims {img.shape[1:]}, first panel is "
                    f"{(h, w)}; pass align=True to resize"
                )
            img = _resize_to(img, h, w)
        if img.shape[0] != channels:
            img = np.repeat(img, channels, axis=0)
        panels.append((label, img))

    inset_h = 0
    if inset is not None:
        top, left, ih, iw = inset
        if top < 0 or left < 0 or ih < 1 or iw < 1 or top + ih > h or left + iw > w:
            raise ValueError(
                f"inset rectangle {inset} outside image bounds (height {h}, width {w})"
            )
        inset_h = ih * zoom + GUTTER

    grid_h = LABEL_BAND + h + inset_h
    grid_w = len(panels) * w + (len(panels) - 1) * GUTTER
    grid = np.ones((channels, grid_h, grid_w))
    for idx, (label, img) in enumerate(panels):
        x0 = idx * (w + GUTTER)
        grid[:, :LABEL_BAND, x0 : x0 + w] = _label_band(label, w)[None, :, :]
        grid[:, LABEL_BAND : LABEL_BAND + h, x0 : x0 + w] = img
        if inset is not None:
            top, left, ih, iw = inset
            crop = img[:, top : top + ih, left : left + iw]
            zoomed = np.repeat(np.repeat(crop, zoom, axis=1), zoom, axis=2)
            y0 = LABEL_BAND + h + GUTTER
            grid[:, y0 : y0 + ih * zoom, x0 : x0 + iw * zoom] = zoomed

    from .image import save_image

    save_image(grid, out_path)
    return grid
