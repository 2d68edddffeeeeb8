"""Toy-scale training of the unfolded network: last-iteration L1 supervision
on both the restored image and the reduced kernel, Adam updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..degradation import DegradationConfig, as_rng, degrade, sample_training_kernel
from ..image import as_image
from ..kernel_space import PcaBasis, fit_default_basis, project
from . import autodiff as ad
from .autodiff import Tensor
from .networks import DAN, DanConfig

__all__ = ["TrainConfig", "Adam", "train_toy"]


@dataclass
class TrainConfig:
    steps: int = 2000
    batch: int = 8
    crop: int = 32  # HR crop side, must be divisible by the scale
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.99
    decay_every: int = 500  # halve the learning rate this often
    kernel_loss_weight: float = 1.0
    setting: int = 1
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1:
            raise ValueError("steps and batch must be >= 1")


class Adam:
    """Adam with bias correction; lr can be reassigned between steps."""

    def __init__(self, params, lr=2e-4, beta1=0.9, beta2=0.99, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)


def _sample_batch(images, hyper: TrainConfig, scale: int, dtype, rng, basis: PcaBasis):
    """One training batch: HR crops degraded by a freshly sampled kernel."""
    kernel = sample_training_kernel(hyper.setting, scale, rng)
    coeffs_gt = project(basis, kernel)
    lr_side = hyper.crop // scale
    hr = np.empty((hyper.batch, images[0].shape[0], hyper.crop, hyper.crop))
    lr = np.empty((hyper.batch, images[0].shape[0], lr_side, lr_side))
    cfg = DegradationConfig(scale=scale, noise_sigma=hyper.noise_sigma, seed=rng)
    for i in range(hyper.batch):
        img = images[int(rng.integers(len(images)))]
        top = int(rng.integers(img.shape[1] - hyper.crop + 1))
        left = int(rng.integers(img.shape[2] - hyper.crop + 1))
        crop = img[:, top : top + hyper.crop, left : left + hyper.crop]
        hr[i] = crop
        lr[i] = degrade(crop, kernel, cfg)
    coeffs = np.repeat(coeffs_gt[None, :], hyper.batch, axis=0)
    return hr.astype(dtype), lr.astype(dtype), coeffs.astype(dtype)


def train_toy(
    dataset: list[np.ndarray],
    cfg: DanConfig,
    hyper: TrainConfig | None = None,
    basis: PcaBasis | None = None,
    dan: DAN | None = None,
    dtype=np.float32,
    log_every: int = 0,
) -> tuple[DAN, list[float]]:
    """Train a (toy) unfolded network on HR images; returns it with the loss curve.

    Each step samples HR crops and one training kernel, degrades the crops,
    runs the unfolded forward pass, and supervises the last iteration's SR
    image and kernel coefficients with L1 losses.  Fully deterministic for a
    fixed seed.
    """
    if not dataset:
        raise ValueError("dataset is empty")
    hyper = hyper or TrainConfig()
    if hyper.crop % cfg.scale:
        raise ValueError(f"crop {hyper.crop} not divisible by scale {cfg.scale}")
    images = [as_image(img) for img in dataset]
    for img in images:
        if img.shape[0] != cfg.img_channels:
            raise ValueError(f"dataset channel count {img.shape[0]} != config {cfg.img_channels}")
        if img.shape[1] < hyper.crop or img.shape[2] < hyper.crop:
            raise ValueError(f"image {img.shape} smaller than crop {hyper.crop}")
    seed_seq = np.random.SeedSequence(hyper.seed)
    init_seed, data_seed = seed_seq.spawn(2)
    if basis is None:
        basis = fit_default_basis(hyper.setting, cfg.scale, m=cfg.m)
    if dan is None:
        dan = DAN(cfg, rng=as_rng(init_seed), dtype=dtype)
    rng = as_rng(data_seed)
    opt = Adam(dan.parameters(), lr=hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2)
    losses: list[float] = []
    for step in range(hyper.steps):
        hr, lr, coeffs_gt = _sample_batch(images, hyper, cfg.scale, dtype, rng, basis)
        sr, coeffs, _ = dan(Tensor(lr), basis)
        loss = ad.add(
            ad.l1_loss(sr, Tensor(hr)),
            ad.mul(
                Tensor(np.asarray(hyper.kernel_loss_weight, dtype=dtype)),
                ad.l1_loss(coeffs, Tensor(coeffs_gt)),
            ),
        )
        value = float(loss.data)
        if not np.isfinite(value):
            raise RuntimeError(f"non-finite loss at step {step}")
        losses.append(value)
        dan.zero_grad()
        loss.backward()
        opt.lr = hyper.lr * 0.5 ** (step // hyper.decay_every)
        opt.step()
        if log_every and (step + 1) % log_every == 0:
            recent = np.mean(losses[-log_every:])
            print(f"step {step + 1}/{hyper.steps}: loss {recent:.5f}")
    return dan, losses
