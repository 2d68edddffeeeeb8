"""Synthetic textured test images: power-law spectrum fields with hard edges.

Natural-image-like content (roughly 1/f spectrum plus step edges) is what
interpolation baselines and restoration methods meaningfully disagree on;
flat-spectrum noise makes them indistinguishable.
"""

from __future__ import annotations

import os

import numpy as np

from .degradation import as_rng
from .image import save_image

__all__ = ["toy_texture", "make_toy_dataset", "write_toy_dataset"]


def toy_texture(
    height: int,
    width: int,
    seed,
    channels: int = 1,
    beta: float = 1.8,
    edges: int = 4,
    edge_amp: float = 3.0,
) -> np.ndarray:
    """One synthetic image in [0, 1]: pink-spectrum field plus random rectangles.

    beta is the spectral slope (larger = smoother); edges rectangles of
    amplitude edge_amp times the field's std provide step discontinuities.
    """
    rng = as_rng(seed)
    chans = []
    for _ in range(channels):
        f = rng.standard_normal((height, width))
        spec = np.fft.fft2(f)
        fy = np.fft.fftfreq(height)[:, None]
        fx = np.fft.fftfreq(width)[None, :]
        rad = np.sqrt(fy**2 + fx**2)
        rad[0, 0] = 1.0
        x = np.real(np.fft.ifft2(spec * rad ** (-beta / 2.0)))
        for _ in range(edges):
            r0 = int(rng.integers(0, height - 4))
            c0 = int(rng.integers(0, width - 4))
            r1 = int(rng.integers(r0 + 2, height))
            c1 = int(rng.integers(c0 + 2, width))
            x[r0:r1, c0:c1] += rng.uniform(-0.5, 0.5) * edge_amp * x.std()
        x = (x - x.min()) / (x.max() - x.min() + 1e-12)
        chans.append(x)
    return np.stack(chans)


def make_toy_dataset(n: int, size: int, seed, channels: int = 1, **texture_kwargs) -> list[np.ndarray]:
    """n independent textures of size x size pixels."""
    root = np.random.SeedSequence(seed if not isinstance(seed, np.random.SeedSequence) else seed.entropy)
    return [toy_texture(size, size, s, channels=channels, **texture_kwargs) for s in root.spawn(n)]


def write_toy_dataset(out_dir: str, n: int, size: int, seed, channels: int = 1) -> list[str]:
    """Write a toy dataset as PNGs; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i, img in enumerate(make_toy_dataset(n, size, seed, channels=channels)):
        path = os.path.join(out_dir, f"toy{i:03d}.png")
        save_image(img, path)
        paths.append(path)
    return paths
