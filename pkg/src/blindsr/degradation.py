"""Degradation model y = (x conv k) downsample_s + n, and blur-kernel generators.

Blur kernels are square, odd-sided, non-negative 2-D float64 arrays that
sum to one.  All sampling takes an explicit seed or numpy Generator
(PCG64); callers that need independent parallel streams should spawn
child seeds via ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import as_image

__all__ = [
    "DegradationConfig",
    "as_rng",
    "check_kernel",
    "convolve2d",
    "downsample_s",
    "add_awgn",
    "degrade",
    "gaussian_isotropic",
    "gaussian_anisotropic",
    "sample_training_kernel",
    "dirac",
    "save_kernel",
    "load_kernel",
]

SETTING1_SIDE = 21
SETTING2_SIDE = 11
SETTING1_WIDTH_MAX = {2: 2.0, 3: 3.0, 4: 4.0}


def as_rng(seed) -> np.random.Generator:
    """Coerce an int seed / SeedSequence / Generator to a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def check_kernel(k: np.ndarray) -> np.ndarray:
    """Validate blur-kernel invariants: square, odd side, >= 0, sums to 1."""
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ValueError(f"kernel must be square 2-D, got shape {k.shape}")
    if k.shape[0] % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {k.shape[0]}")
    if np.any(k < 0):
        raise ValueError("kernel has negative weights")
    s = k.sum()
    if abs(s - 1.0) > 1e-8:
        raise ValueError(f"kernel weights sum to {s!r}, expected 1")
    return k


@dataclass
class DegradationConfig:
    """Parameters of the degradation pipeline.

    noise_sigma is the AWGN level on the 0-255 code scale.  Some sources
    quote the level 15 as a "covariance"; set sigma_is_variance=True to
    interpret noise_sigma as a variance instead of a standard deviation.
    """

    scale: int = 1
    noise_sigma: float = 0.0
    seed: int | None = None
    boundary: str = "edge"
    sigma_is_variance: bool = False

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.boundary != "edge":
            raise ValueError(
                f"unsupported boundary {self.boundary!r}; only 'edge' "
                "(replicate) padding is implemented"
            )

    @property
    def noise_std(self) -> float:
        if self.sigma_is_variance:
            return float(np.sqrt(self.noise_sigma))
        return float(self.noise_sigma)


def convolve2d(img: np.ndarray, k: np.ndarray) -> np.ndarray:
    """True 2-D convolution (kernel flipped) with edge-replicate padding.

    Output has the same size as the input; each channel is convolved
    independently.
    """
    img = as_image(img)
    k = check_kernel(k)
    side = k.shape[0]
    c = (side - 1) // 2
    _, h, w = img.shape
    pad = np.pad(img, ((0, 0), (c, c), (c, c)), mode="edge")
    out = np.zeros_like(img)
    # out[i,j] = sum_{a,b} k[a,b] * x_ext[i+c-a, j+c-b], shift-and-add form
    for a in range(side):
        for b in range(side):
            if k[a, b] == 0.0:
                continue
            out += k[a, b] * pad[:, 2 * c - a : 2 * c - a + h, 2 * c - b : 2 * c - b + w]
    return out


def downsample_s(img: np.ndarray, s: int) -> np.ndarray:
    """s-fold downsampler: keep the upper-left pixel of each s x s patch."""
    if s < 1:
        raise ValueError(f"scale must be >= 1, got {s}")
    img = as_image(img)
    _, h, w = img.shape
    if h % s or w % s:
        raise ValueError(f"dims {h}x{w} not divisible by scale {s} (modcrop first)")
    return np.ascontiguousarray(img[:, ::s, ::s])


def add_awgn(img: np.ndarray, sigma255: float, seed=None) -> np.ndarray:
    """Add i.i.d. N(0, (sigma255/255)^2) noise.  No clamping."""
    if sigma255 < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma255}")
    img = as_image(img)
    if sigma255 == 0:
        return img.copy()
    rng = as_rng(seed)
    return img + rng.normal(0.0, sigma255 / 255.0, size=img.shape)


def degrade(x: np.ndarray, k: np.ndarray, cfg: DegradationConfig) -> np.ndarray:
    """Apply blur, s-fold downsampling and AWGN, in that order."""
    blurred = convolve2d(x, k)
    lr = downsample_s(blurred, cfg.scale)
    return add_awgn(lr, cfg.noise_std, cfg.seed)


def _centered_grid(side: int) -> tuple[np.ndarray, np.ndarray]:
    c = (side - 1) / 2.0
    idx = np.arange(side, dtype=np.float64) - c
    return np.meshgrid(idx, idx, indexing="ij")


def gaussian_isotropic(side: int, width: float) -> np.ndarray:
    """Isotropic Gaussian kernel of the given width, normalized to sum 1."""
    if width <= 0:
        raise ValueError(f"width must be positive, got {width}")
    if side % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {side}")
    di, dj = _centered_grid(side)
    w = np.exp(-(di**2 + dj**2) / (2.0 * width**2))
    return w / w.sum()


def gaussian_anisotropic(
    side: int,
    sig1: float,
    sig2: float,
    theta: float,
    noise_frac: float = 0.0,
    seed=None,
) -> np.ndarray:
    """Rotated anisotropic Gaussian kernel with uniform multiplicative noise.

    sig1 is the std-dev along the horizontal axis before counter-clockwise
    rotation by theta, sig2 along the vertical.  Each tap is multiplied by
    (1 + u), u ~ Uniform(-noise_frac, +noise_frac), clamped at 0 and the
    kernel renormalized to sum 1.
    """
    if not (0.6 < sig1 < 5.0 and 0.6 < sig2 < 5.0):
        raise ValueError(f"axis widths must lie in (0.6, 5), got {sig1}, {sig2}")
    if not (-np.pi <= theta <= np.pi):
        raise ValueError(f"theta must lie in [-pi, pi], got {theta}")
    if not (0.0 <= noise_frac <= 0.25):
        raise ValueError(f"noise_frac must lie in [0, 0.25], got {noise_frac}")
    if side % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {side}")
    rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    inv_cov = rot @ np.diag([1.0 / sig1**2, 1.0 / sig2**2]) @ rot.T
    di, dj = _centered_grid(side)
    # (x, y) = (horizontal, vertical) offsets = (dj, di)
    quad = (
        inv_cov[0, 0] * dj**2
        + 2.0 * inv_cov[0, 1] * dj * di
        + inv_cov[1, 1] * di**2
    )
    w = np.exp(-0.5 * quad)
    if noise_frac > 0:
        rng = as_rng(seed)
        w = w * (1.0 + rng.uniform(-noise_frac, noise_frac, size=w.shape))
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def sample_training_kernel(setting: int, scale: int, rng) -> np.ndarray:
    """Draw one random training kernel for the given degradation setting.

    Setting 1: isotropic, side 21, width ~ U[0.2, B(scale)] with
    B(2)=2.0, B(3)=3.0, B(4)=4.0.  Setting 2: anisotropic, side 11,
    axis widths ~ U(0.6, 5), angle ~ U[-pi, pi], 25% multiplicative noise.
    """
    rng = as_rng(rng)
    if setting == 1:
        if scale not in SETTING1_WIDTH_MAX:
            raise ValueError(f"setting 1 supports scales 2/3/4, got {scale}")
        width = rng.uniform(0.2, SETTING1_WIDTH_MAX[scale])
        return gaussian_isotropic(SETTING1_SIDE, width)
    if setting == 2:
        sig1, sig2 = rng.uniform(0.6, 5.0, size=2)
        theta = rng.uniform(-np.pi, np.pi)
        return gaussian_anisotropic(
            SETTING2_SIDE, sig1, sig2, theta, noise_frac=0.25, seed=rng
        )
    raise ValueError(f"setting must be 1 or 2, got {setting}")


def dirac(side: int) -> np.ndarray:
    """Identity kernel: center tap 1, all others 0."""
    if side % 2 == 0 or side < 1:
        raise ValueError(f"kernel side must be odd and >= 1, got {side}")
    k = np.zeros((side, side))
    k[(side - 1) // 2, (side - 1) // 2] = 1.0
    return k


def save_kernel(k: np.ndarray, path: str) -> None:
    """Write the text kernel format: 'K <side>' then side rows of floats."""
    k = check_kernel(k)
    with open(path, "w") as fh:
        fh.write(f"K {k.shape[0]}\n")
        np.savetxt(fh, k, fmt="%.17g")


def load_kernel(path: str) -> np.ndarray:
    """Read the text kernel format written by save_kernel."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "K":
            raise IOError(f"{path!r}: expected 'K <side>' header, got {header}")
        side = int(header[1])
        k = np.loadtxt(fh, dtype=np.float64).reshape(side, side)
    return check_kernel(k)
