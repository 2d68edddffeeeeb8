"""Classical solver back-ends: least-squares kernel estimation and a
conjugate-gradient restorer with a squared-gradient (Tikhonov) prior.

The degradation operator D_k = downsample_s(convolve2d(., k)) is linear;
its exact adjoint is assembled from the adjoints of the three stages
(replicate pad, valid convolution, strided subsampling), which is what
makes matrix-free CG on the normal equations correct.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .degradation import DegradationConfig, check_kernel, convolve2d, degrade, downsample_s
from .image import as_image, bicubic_resize
from .kernel_space import PcaBasis, project

__all__ = [
    "LsEstimatorConfig",
    "CgRestorerConfig",
    "RestoreResult",
    "estimate_kernel_ls",
    "estimate_kernel_reduced",
    "restore_cg",
    "adjoint_check",
    "simplex_project",
    "degrade_operator",
    "degrade_operator_adjoint",
    "make_classical_contracts",
]


@dataclass
class LsEstimatorConfig:
    ridge: float = 1e-6
    simplex_project: bool = True

    def __post_init__(self):
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")


@dataclass
class CgRestorerConfig:
    lam: float = 1e-4  # weight of the squared image-gradient prior
    max_iters: int = 200
    tol: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class RestoreResult:
    image: np.ndarray
    iterations: int
    converged: bool
    objectives: list[float] | None = None


def degrade_operator(x: np.ndarray, k: np.ndarray, scale: int) -> np.ndarray:
    """Noiseless forward operator D_k x (blur then s-fold subsample)."""
    return downsample_s(convolve2d(x, k), scale)


def degrade_operator_adjoint(
    v: np.ndarray, k: np.ndarray, scale: int, hr_shape: tuple[int, int, int]
) -> np.ndarray:
    """Exact adjoint of degrade_operator for given HR dims (C, H, W)."""
    k = check_kernel(k)
    v = as_image(v)
    c_ch, h, w = hr_shape
    side = k.shape[0]
    c = (side - 1) // 2
    # adjoint of subsampling: zero-fill upsample
    z = np.zeros((c_ch, h, w))
    z[:, ::scale, ::scale] = v
    # adjoint of valid convolution: scatter-add into the padded layout
    gz = np.zeros((c_ch, h + 2 * c, w + 2 * c))
    for a in range(side):
        for b in range(side):
            if k[a, b] == 0.0:
                continue
            gz[:, 2 * c - a : 2 * c - a + h, 2 * c - b : 2 * c - b + w] += k[a, b] * z
    return _pad_edge_adjoint(gz, c)


def _pad_edge_adjoint(z: np.ndarray, c: int) -> np.ndarray:
    """Adjoint of replicate padding: fold padded borders onto edge pixels."""
    if c == 0:
        return z.copy()
    rows = z[:, c:-c, :].copy()
    rows[:, 0, :] += z[:, :c, :].sum(axis=1)
    rows[:, -1, :] += z[:, -c:, :].sum(axis=1)
    out = rows[:, :, c:-c].copy()
    out[:, :, 0] += rows[:, :, :c].sum(axis=2)
    out[:, :, -1] += rows[:, :, -c:].sum(axis=2)
    return out


def image_gradient(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences with replicate boundary (last row/col zero)."""
    gy = np.zeros_like(x)
    gx = np.zeros_like(x)
    gy[:, :-1, :] = x[:, 1:, :] - x[:, :-1, :]
    gx[:, :, :-1] = x[:, :, 1:] - x[:, :, :-1]
    return gy, gx


def image_gradient_adjoint(gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Exact adjoint of image_gradient (negative divergence)."""
    out = np.zeros_like(gy)
    out[:, 0, :] -= gy[:, 0, :]
    out[:, 1:-1, :] += gy[:, :-2, :] - gy[:, 1:-1, :]
    out[:, -1, :] += gy[:, -2, :]
    out[:, :, 0] -= gx[:, :, 0]
    out[:, :, 1:-1] += gx[:, :, :-2] - gx[:, :, 1:-1]
    out[:, :, -1] += gx[:, :, -2]
    return out


def _degradation_matrix(sr: np.ndarray, side: int, scale: int) -> np.ndarray:
    """Linear system matrix A with A[:, j] = vec(degrade(sr, e_j, scale, 0)).

    Exploits linearity of the degradation in the kernel: column j is the
    padded SR image sampled at the stride grid, flipped for convolution.
    Dense, so intended for desk-scale images.
    """
    sr = as_image(sr)
    c = (side - 1) // 2
    pad = np.pad(sr, ((0, 0), (c, c), (c, c)), mode="edge")
    win = sliding_window_view(pad, (side, side), axis=(1, 2))[:, ::scale, ::scale]
    n_ch, h_lr, w_lr = win.shape[:3]
    a_mat = win[:, :, :, ::-1, ::-1].reshape(n_ch * h_lr * w_lr, side * side)
    return np.ascontiguousarray(a_mat)


def estimate_kernel_ls(
    lr: np.ndarray,
    sr: np.ndarray,
    side: int,
    cfg: LsEstimatorConfig,
    scale: int,
) -> np.ndarray:
    """Least-squares kernel estimate from an LR/SR pair.

    Solves the ridge-regularized normal equations of A k = vec(lr) and,
    when cfg.simplex_project, projects the solution onto the probability
    simplex {k >= 0, sum k = 1}.
    """
    lr = as_image(lr)
    sr = as_image(sr)
    _check_ls_dims(lr, sr, side, scale)
    if np.ptp(sr) < 1e-12:
        raise ValueError(
            "sr image is constant: all kernel columns are identical, "
            "the kernel is unidentifiable"
        )
    a_mat = _degradation_matrix(sr, side, scale)
    y = lr.ravel()
    gram = a_mat.T @ a_mat
    gram[np.diag_indices_from(gram)] += cfg.ridge
    sol = np.linalg.solve(gram, a_mat.T @ y)
    if not np.all(np.isfinite(sol)):
        raise ValueError("kernel solve produced non-finite values (degenerate system)")
    if cfg.simplex_project:
        sol = simplex_project(sol)
    return sol.reshape(side, side)


def estimate_kernel_reduced(
    lr: np.ndarray,
    sr: np.ndarray,
    basis: PcaBasis,
    cfg: LsEstimatorConfig,
    scale: int,
) -> np.ndarray:
    """Least-squares kernel estimate restricted to the PCA subspace.

    Solves for the reduced coefficients of k = mean + components^T c.  With
    cfg.simplex_project the linear reconstruction is projected onto the
    simplex and re-expressed in coefficients.
    """
    lr = as_image(lr)
    sr = as_image(sr)
    _check_ls_dims(lr, sr, basis.side, scale)
    if np.ptp(sr) < 1e-12:
        raise ValueError(
            "sr image is constant: all kernel columns are identical, "
            "the kernel is unidentifiable"
        )
    a_mat = _degradation_matrix(sr, basis.side, scale)
    a_red = a_mat @ basis.components.T
    y = lr.ravel() - a_mat @ basis.mean
    gram = a_red.T @ a_red
    gram[np.diag_indices_from(gram)] += cfg.ridge
    coeffs = np.linalg.solve(gram, a_red.T @ y)
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("kernel solve produced non-finite values (degenerate system)")
    if cfg.simplex_project:
        k_lin = basis.mean + basis.components.T @ coeffs
        k_proj = simplex_project(k_lin)
        coeffs = basis.components @ (k_proj - basis.mean)
    return coeffs


def _check_ls_dims(lr: np.ndarray, sr: np.ndarray, side: int, scale: int) -> None:
    if sr.shape[1] != lr.shape[1] * scale or sr.shape[2] != lr.shape[2] * scale:
        raise ValueError(f"sr dims {sr.shape} != lr dims {lr.shape} x scale {scale}")
    if lr.shape[1] * lr.shape[2] < side * side:
        raise ValueError(
            f"lr has {lr.shape[1] * lr.shape[2]} pixels, fewer than "
            f"side^2 = {side * side} unknowns"
        )


def simplex_project(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-threshold)."""
    v = np.asarray(v, dtype=np.float64).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def restore_cg(
    lr: np.ndarray,
    k: np.ndarray,
    cfg: CgRestorerConfig,
    scale: int,
    track_objective: bool = False,
) -> RestoreResult:
    """Minimize ||lr - D_k x||^2 + lam ||grad x||^2 by CG on the normal equations.

    Starts from the bicubic upsample of lr and stops when the relative
    normal-equation residual drops below cfg.tol or at cfg.max_iters,
    whichever comes first.
    """
    lr = as_image(lr)
    k = check_kernel(k)
    hr_shape = (lr.shape[0], lr.shape[1] * scale, lr.shape[2] * scale)

    def apply_m(x: np.ndarray) -> np.ndarray:
        out = degrade_operator_adjoint(degrade_operator(x, k, scale), k, scale, hr_shape)
        if cfg.lam > 0:
            gy, gx = image_gradient(x)
            out += cfg.lam * image_gradient_adjoint(gy, gx)
        return out

    def objective(x: np.ndarray) -> float:
        r = degrade_operator(x, k, scale) - lr
        val = float(np.sum(r * r))
        if cfg.lam > 0:
            gy, gx = image_gradient(x)
            val += cfg.lam * float(np.sum(gy * gy) + np.sum(gx * gx))
        return val

    x = bicubic_resize(lr, scale)
    b = degrade_operator_adjoint(lr, k, scale, hr_shape)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        b_norm = 1.0
    r = b - apply_m(x)
    p = r.copy()
    rs = float(np.sum(r * r))
    objectives = [objective(x)] if track_objective else None
    converged = np.sqrt(rs) <= cfg.tol * b_norm
    iters = 0
    while not converged and iters < cfg.max_iters:
        mp = apply_m(p)
        denom = float(np.sum(p * mp))
        if denom <= 0.0:
            break  # numerical breakdown; current iterate is the best available
        alpha = rs / denom
        x = x + alpha * p
        r = r - alpha * mp
        rs_new = float(np.sum(r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
        iters += 1
        if track_objective:
            objectives.append(objective(x))
        converged = np.sqrt(rs) <= cfg.tol * b_norm
    return RestoreResult(image=x, iterations=iters, converged=bool(converged), objectives=objectives)


def adjoint_check(k: np.ndarray, scale: int, dims: tuple[int, int], trials: int = 20, seed=0) -> float:
    """Max relative error of <D u, v> vs <u, D^T v> over random trials."""
    from .degradation import as_rng

    rng = as_rng(seed)
    h, w = dims
    if h % scale or w % scale:
        raise ValueError(f"dims {dims} not divisible by scale {scale}")
    hr_shape = (1, h, w)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(hr_shape)
        v = rng.standard_normal((1, h // scale, w // scale))
        lhs = float(np.sum(degrade_operator(u, k, scale) * v))
        rhs = float(np.sum(u * degrade_operator_adjoint(v, k, scale, hr_shape)))
        err = abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v))
        worst = max(worst, err)
    return worst


def make_classical_contracts(
    est_cfg: LsEstimatorConfig | None = None,
    res_cfg: CgRestorerConfig | None = None,
):
    """Engine contracts backed by the classical solvers."""
    est_cfg = est_cfg or LsEstimatorConfig()
    res_cfg = res_cfg or CgRestorerConfig()

    def estimator(lr, sr, basis, scale):
        return estimate_kernel_reduced(lr, sr, basis, est_cfg, scale)

    def restorer(lr, coeffs, basis, scale):
        from .kernel_space import reconstruct

        return restore_cg(lr, reconstruct(basis, coeffs), res_cfg, scale).image

    return estimator, restorer
