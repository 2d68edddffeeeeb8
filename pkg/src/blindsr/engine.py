"""Unfolded alternating loop: Dirac-initialized kernel, then Restorer/Estimator.

Solver back-ends plug in through two callable contracts:

    estimator(lr, sr, basis, scale)      -> reduced kernel coefficients (m,)
    restorer(lr, coeffs, basis, scale)   -> restored image, dims = lr dims * scale

Both must be deterministic and side-effect free; the engine treats them as
black boxes and never mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .degradation import DegradationConfig, check_kernel, degrade, dirac
from .image import as_image, bicubic_resize
from .kernel_space import PcaBasis, project, reconstruct

__all__ = ["AlternationTrace", "AlternationError", "run_alternation", "data_residual", "write_trace_csv"]


class AlternationError(RuntimeError):
    """Contract failure, annotated with the iteration it occurred in."""

    def __init__(self, iteration: int, stage: str, cause: Exception):
        super().__init__(f"iteration {iteration}, {stage}: {cause}")
        self.iteration = iteration
        self.stage = stage


@dataclass
class AlternationTrace:
    """Per-iteration record of the alternation."""

    kernels: list[np.ndarray] = field(default_factory=list)  # reduced coeffs
    images: list[np.ndarray] = field(default_factory=list)  # restored images
    residuals: list[float] = field(default_factory=list)  # L1 data residuals

    @property
    def iterations(self) -> int:
        return len(self.residuals)


def data_residual(x: np.ndarray, k: np.ndarray, y: np.ndarray, scale: int) -> float:
    """Mean absolute difference between the noiseless degradation of x and y."""
    x = as_image(x)
    y = as_image(y)
    check_kernel(k)
    if x.shape[0] != y.shape[0] or x.shape[1] != y.shape[1] * scale or x.shape[2] != y.shape[2] * scale:
        raise ValueError(f"dims {x.shape} inconsistent with {y.shape} at scale {scale}")
    pred = degrade(x, k, DegradationConfig(scale=scale, noise_sigma=0.0))
    return float(np.mean(np.abs(pred - y)))


def run_alternation(
    lr: np.ndarray,
    basis: PcaBasis,
    estimator,
    restorer,
    scale: int,
    iterations: int,
    restorer_first: bool = True,
) -> AlternationTrace:
    """Alternate Restorer and Estimator for a fixed number of iterations.

    The kernel is initialized as the reduced projection of the Dirac
    kernel.  With restorer_first (the default flow), each iteration runs
    x_i = restorer(lr, k_{i-1}) followed by k_i = estimator(lr, x_i); the
    estimator-first variant starts from a bicubic SR guess instead.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    lr = as_image(lr)
    coeffs = project(basis, dirac(basis.side))
    trace = AlternationTrace()
    sr = bicubic_resize(lr, scale) if not restorer_first else None
    for i in range(1, iterations + 1):
        if restorer_first:
            try:
                sr = as_image(restorer(lr, coeffs, basis, scale))
            except Exception as exc:
                raise AlternationError(i, "restorer", exc) from exc
            try:
                coeffs = np.asarray(estimator(lr, sr, basis, scale), dtype=np.float64)
            except Exception as exc:
                raise AlternationError(i, "estimator", exc) from exc
        else:
            try:
                coeffs = np.asarray(estimator(lr, sr, basis, scale), dtype=np.float64)
            except Exception as exc:
                raise AlternationError(i, "estimator", exc) from exc
            try:
                sr = as_image(restorer(lr, coeffs, basis, scale))
            except Exception as exc:
                raise AlternationError(i, "restorer", exc) from exc
        trace.kernels.append(coeffs.copy())
        trace.images.append(sr.copy())
        trace.residuals.append(data_residual(sr, reconstruct(basis, coeffs), lr, scale))
    return trace


def write_trace_csv(trace: AlternationTrace, path: str) -> None:
    """Write the trace as CSV: iter, residual_l1, kernel coefficients."""
    m = len(trace.kernels[0]) if trace.kernels else 0
    with open(path, "w") as fh:
        fh.write("iter,residual_l1," + ",".join(f"k{j}" for j in range(m)) + "\n")
        for i, (coeffs, res) in enumerate(zip(trace.kernels, trace.residuals), start=1):
            row = ",".join(repr(float(c)) for c in coeffs)
            fh.write(f"{i},{res!r},{row}\n")
