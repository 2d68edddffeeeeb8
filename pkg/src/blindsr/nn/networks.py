"""Conditional-residual-block networks: kernel Estimator, image Restorer,
and the unfolded alternating network that ties them together.

Both networks keep the LR image as their basic input; the conditional
input (downsampled SR features for the Estimator, the stretched reduced
kernel for the Restorer) is what changes between iterations, and every
block consumes it so the outputs stay tied to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..degradation import as_rng, dirac
from ..kernel_space import PcaBasis, project
from . import autodiff as ad
from .autodiff import Tensor

__all__ = ["DanConfig", "Module", "Conv2d", "ChannelAttention", "CRB", "Estimator", "Restorer", "DAN"]


@dataclass
class DanConfig:
    """Architecture hyperparameters for the Estimator/Restorer pair."""

    scale: int = 4
    iterations: int = 4
    m: int = 10
    img_channels: int = 3
    est_blocks: int = 5
    est_basic: int = 32
    est_cond: int = 32
    res_blocks: int = 40
    res_basic: int = 64
    res_cond: int = 10
    attention_reduction: int = 16

    def __post_init__(self):
        if self.res_cond != self.m:
            raise ValueError(
                f"restorer conditional channels ({self.res_cond}) must equal "
                f"the reduced kernel dimension m ({self.m})"
            )
        if self.scale not in (1, 2, 3, 4):
            raise ValueError(f"scale must be 1..4, got {self.scale}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")

    @classmethod
    def toy(cls, scale: int = 2, img_channels: int = 1, iterations: int = 4) -> "DanConfig":
        """Desk-scale preset: small enough to train and gradient-check on a CPU."""
        return cls(
            scale=scale,
            iterations=iterations,
            m=10,
            img_channels=img_channels,
            est_blocks=3,
            est_basic=16,
            est_cond=16,
            res_blocks=4,
            res_basic=16,
            res_cond=10,
            attention_reduction=4,
        )

    def upscale_stages(self) -> list[int]:
        return {1: [], 2: [2], 3: [3], 4: [2, 2]}[self.scale]


class Module:
    """Tiny container base: collects parameters from attributes recursively."""

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for name, attr in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(attr, Tensor) and attr.requires_grad:
                out.append((full, attr))
            elif isinstance(attr, Module):
                out.extend(attr.named_parameters(f"{full}."))
            elif isinstance(attr, (list, tuple)):
                for i, item in enumerate(attr):
                    if isinstance(item, Module):
                        out.extend(item.named_parameters(f"{full}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Conv2d(Module):
    """Square convolution, Kaiming-uniform fan-in weights, zero bias."""

    def __init__(self, cin: int, cout: int, k: int = 3, stride: int = 1, rng=None, dtype=np.float64):
        rng = as_rng(rng)
        fan_in = cin * k * k
        # leaky-relu (a = sqrt(5)) Kaiming-uniform convention; the hotter
        # relu gain makes the unfolded feedback loop blow up at init
        bound = np.sqrt(1.0 / fan_in)
        self.weight = Tensor(
            rng.uniform(-bound, bound, size=(cout, cin, k, k)).astype(dtype), requires_grad=True
        )
        self.bias = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True)
        self.stride = stride

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.bias, stride=self.stride)


class ChannelAttention(Module):
    """Squeeze-excite gate: pool, bottleneck 1x1 convs, sigmoid rescale."""

    def __init__(self, channels: int, reduction: int, rng=None, dtype=np.float64):
        if channels % reduction:
            raise ValueError(f"channels {channels} not divisible by reduction {reduction}")
        rng = as_rng(rng)
        self.squeeze = Conv2d(channels, channels // reduction, k=1, rng=rng, dtype=dtype)
        self.excite = Conv2d(channels // reduction, channels, k=1, rng=rng, dtype=dtype)

    def __call__(self, x: Tensor) -> Tensor:
        gate = ad.spatial_mean(x, keepdims=True)
        gate = ad.sigmoid(self.excite(ad.relu(self.squeeze(gate))))
        return ad.mul(x, gate)


class CRB(Module):
    """Conditional residual block: out = R(concat(basic, cond)) + basic.

    The residual mapping is conv3x3 -> relu -> conv3x3 -> channel attention.
    """

    def __init__(self, basic_ch: int, cond_ch: int, reduction: int, rng=None, dtype=np.float64):
        rng = as_rng(rng)
        self.conv1 = Conv2d(basic_ch + cond_ch, basic_ch, k=3, rng=rng, dtype=dtype)
        self.conv2 = Conv2d(basic_ch, basic_ch, k=3, rng=rng, dtype=dtype)
        self.attention = ChannelAttention(basic_ch, reduction, rng=rng, dtype=dtype)

    def __call__(self, basic: Tensor, cond: Tensor) -> Tensor:
        res = self.attention(self.conv2(ad.relu(self.conv1(ad.concat(basic, cond)))))
        return ad.add(res, basic)


class Estimator(Module):
    """Predicts reduced kernel coefficients from the LR image and current SR.

    The SR image is brought to LR resolution by a stride-s convolution; the
    resulting feature map conditions every block, and a global average pool
    squeezes the final features into the m coefficients.
    """

    def __init__(self, cfg: DanConfig, rng=None, dtype=np.float64):
        rng = as_rng(rng)
        self.cond_head = Conv2d(cfg.img_channels, cfg.est_cond, k=3, stride=cfg.scale, rng=rng, dtype=dtype)
        self.basic_head = Conv2d(cfg.img_channels, cfg.est_basic, k=3, rng=rng, dtype=dtype)
        self.blocks = [
            CRB(cfg.est_basic, cfg.est_cond, cfg.attention_reduction, rng=rng, dtype=dtype)
            for _ in range(cfg.est_blocks)
        ]
        self.tail = Conv2d(cfg.est_basic, cfg.m, k=3, rng=rng, dtype=dtype)
        self.scale = cfg.scale

    def __call__(self, lr: Tensor, sr: Tensor) -> Tensor:
        if sr.shape[2] != lr.shape[2] * self.scale or sr.shape[3] != lr.shape[3] * self.scale:
            raise ValueError(f"sr dims {sr.shape} are not lr dims {lr.shape} x {self.scale}")
        cond = self.cond_head(sr)
        basic = self.basic_head(lr)
        for block in self.blocks:
            basic = block(basic, cond)
        return ad.spatial_mean(self.tail(basic))


class Restorer(Module):
    """Restores the SR image from the LR image and reduced kernel coefficients.

    The coefficients are stretched to an m-channel constant map at LR size
    and condition every block; pixel-shuffle stages upscale to the output.
    """

    def __init__(self, cfg: DanConfig, rng=None, dtype=np.float64):
        rng = as_rng(rng)
        self.head = Conv2d(cfg.img_channels, cfg.res_basic, k=3, rng=rng, dtype=dtype)
        self.blocks = [
            CRB(cfg.res_basic, cfg.res_cond, cfg.attention_reduction, rng=rng, dtype=dtype)
            for _ in range(cfg.res_blocks)
        ]
        self.upconvs = [
            Conv2d(cfg.res_basic, cfg.res_basic * r * r, k=3, rng=rng, dtype=dtype)
            for r in cfg.upscale_stages()
        ]
        self.tail = Conv2d(cfg.res_basic, cfg.img_channels, k=3, rng=rng, dtype=dtype)
        self.stages = cfg.upscale_stages()

    def __call__(self, lr: Tensor, coeffs: Tensor) -> Tensor:
        _, _, h, w = lr.shape
        cond = ad.stretch2d(coeffs, h, w)
        feat = self.head(lr)
        for block in self.blocks:
            feat = block(feat, cond)
        for conv, r in zip(self.upconvs, self.stages):
            feat = ad.pixel_shuffle(conv(feat), r)
        return self.tail(feat)


@dataclass
class DanTrace:
    """Intermediate per-iteration outputs of the unfolded network."""

    coeffs: list[Tensor] = field(default_factory=list)
    images: list[Tensor] = field(default_factory=list)


class DAN(Module):
    """Unfolded alternation of Restorer and Estimator with shared parameters.

    The kernel starts as the reduced projection of the Dirac kernel; each
    iteration restores with the current coefficients and re-estimates them
    from the restored image.  Gradients flow through all iterations.
    """

    def __init__(self, cfg: DanConfig, rng=None, dtype=np.float64):
        rng = as_rng(rng)
        self.estimator = Estimator(cfg, rng=rng, dtype=dtype)
        self.restorer = Restorer(cfg, rng=rng, dtype=dtype)
        self.cfg = cfg
        self.dtype = dtype

    def initial_coeffs(self, basis: PcaBasis, batch: int) -> Tensor:
        k0 = project(basis, dirac(basis.side)).astype(self.dtype)
        return Tensor(np.repeat(k0[None, :], batch, axis=0))

    def __call__(self, lr: Tensor, basis: PcaBasis, iterations: int | None = None) -> tuple[Tensor, Tensor, DanTrace]:
        t_iters = self.cfg.iterations if iterations is None else iterations
        if t_iters < 1:
            raise ValueError(f"iterations must be >= 1, got {t_iters}")
        coeffs = self.initial_coeffs(basis, lr.shape[0])
        trace = DanTrace()
        sr = None
        for _ in range(t_iters):
            sr = self.restorer(lr, coeffs)
            coeffs = self.estimator(lr, sr)
            trace.images.append(sr)
            trace.coeffs.append(coeffs)
        return sr, coeffs, trace
