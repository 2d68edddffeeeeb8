"""Blind single-image super-resolution by alternating kernel estimation and
restoration, with classical and small neural solver back-ends.
"""

from . import bench, degradation, engine, image, kernel_space, metrics, nn, solvers, toydata

__version__ = "0.1.0"

__all__ = [
    "image",
    "degradation",
    "kernel_space",
    "engine",
    "solvers",
    "nn",
    "metrics",
    "bench",
    "toydata",
    "__version__",
]
