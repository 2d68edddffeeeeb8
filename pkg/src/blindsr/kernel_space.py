"""PCA reduction of blur kernels and back-projection to kernel space.

A reduced kernel is a plain 1-D float64 coefficient vector of length m.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .degradation import as_rng, check_kernel, sample_training_kernel

__all__ = [
    "PcaBasis",
    "fit_pca",
    "fit_default_basis",
    "project",
    "reconstruct",
    "save_basis",
    "load_basis",
]

_MAGIC = b"PCAB"


@dataclass(frozen=True)
class PcaBasis:
    """Mean vector plus orthonormal component rows for side x side kernels."""

    side: int
    m: int
    mean: np.ndarray  # (side*side,)
    components: np.ndarray  # (m, side*side), orthonormal rows

    def __post_init__(self):
        if self.mean.shape != (self.side * self.side,):
            raise ValueError(f"mean has shape {self.mean.shape}, expected ({self.side**2},)")
        if self.components.shape != (self.m, self.side * self.side):
            raise ValueError(
                f"components have shape {self.components.shape}, "
                f"expected ({self.m}, {self.side**2})"
            )
        if self.m > self.side * self.side:
            raise ValueError(f"m={self.m} exceeds side^2={self.side**2}")
        gram = self.components @ self.components.T
        if not np.allclose(gram, np.eye(self.m), atol=1e-8):
            raise ValueError("component rows are not orthonormal")


def fit_pca(kernels: list[np.ndarray], m: int) -> PcaBasis:
    """Fit a PCA basis to vectorized kernels.

    Components are the top-m right singular vectors of the centered sample
    matrix, rows ordered by descending singular value; each row is signed
    so its largest-magnitude entry is positive.
    """
    if len(kernels) < m:
        raise ValueError(f"need at least m={m} kernels, got {len(kernels)}")
    sides = {k.shape[0] for k in kernels}
    if len(sides) != 1:
        raise ValueError(f"kernels have mixed sides {sorted(sides)}")
    side = sides.pop()
    mat = np.stack([check_kernel(k).ravel() for k in kernels])
    mean = mat.mean(axis=0)
    _, _, vt = np.linalg.svd(mat - mean, full_matrices=False)
    components = vt[:m].copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaBasis(side=side, m=m, mean=mean, components=components)


def fit_default_basis(
    setting: int, scale: int, m: int = 10, n_samples: int = 10000, seed=0
) -> PcaBasis:
    """Fit the default basis on kernels drawn by sample_training_kernel."""
    rng = as_rng(seed)
    kernels = [sample_training_kernel(setting, scale, rng) for _ in range(n_samples)]
    return fit_pca(kernels, m)


def project(basis: PcaBasis, k: np.ndarray) -> np.ndarray:
    """Reduced coefficients: components @ (vec(k) - mean)."""
    k = check_kernel(k)
    if k.shape[0] != basis.side:
        raise ValueError(f"kernel side {k.shape[0]} != basis side {basis.side}")
    return basis.components @ (k.ravel() - basis.mean)


def reconstruct(basis: PcaBasis, coeffs: np.ndarray) -> np.ndarray:
    """Back-project coefficients to a valid kernel.

    Negative taps are clamped to zero and the kernel renormalized to sum 1.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (basis.m,):
        raise ValueError(f"coefficient shape {coeffs.shape} != ({basis.m},)")
    v = basis.mean + basis.components.T @ coeffs
    k = np.clip(v.reshape(basis.side, basis.side), 0.0, None)
    total = k.sum()
    if total <= 1e-12:
        raise ValueError("degenerate reconstruction: all taps clamped to zero")
    return k / total


def save_basis(basis: PcaBasis, path: str) -> None:
    """Write the binary basis format: magic 'PCAB', side/m int32, float64 data."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sii", _MAGIC, basis.side, basis.m))
        fh.write(basis.mean.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.components).astype("<f8").tobytes())


def load_basis(path: str) -> PcaBasis:
    """Read the binary basis format written by save_basis."""
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) != 12:
            raise IOError(f"{path!r}: truncated basis file")
        magic, side, m = struct.unpack("<4sii", head)
        if magic != _MAGIC:
            raise IOError(f"{path!r}: bad magic {magic!r}, expected {_MAGIC!r}")
        n = side * side
        blob = np.frombuffer(fh.read(8 * n * (m + 1)), dtype="<f8")
        if blob.size != n * (m + 1):
            raise IOError(f"{path!r}: truncated basis data")
    return PcaBasis(side=side, m=m, mean=blob[:n].copy(), components=blob[n:].reshape(m, n).copy())
