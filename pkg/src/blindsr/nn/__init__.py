"""Neural back-end: minimal autodiff, conditional residual networks, training."""

from . import autodiff
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .networks import CRB, DAN, ChannelAttention, Conv2d, DanConfig, Estimator, Restorer
from .train import Adam, TrainConfig, train_toy

__all__ = [
    "autodiff",
    "Tensor",
    "Conv2d",
    "ChannelAttention",
    "CRB",
    "Estimator",
    "Restorer",
    "DAN",
    "DanConfig",
    "Adam",
    "TrainConfig",
    "train_toy",
    "save_checkpoint",
    "load_checkpoint",
]


def make_neural_contracts(dan):
    """Engine contracts backed by a trained network (shared per call pair)."""
    import numpy as np

    def estimator(lr, sr, basis, scale):
        out = dan.estimator(Tensor(lr[None].astype(dan.dtype)), Tensor(sr[None].astype(dan.dtype)))
        return np.asarray(out.data[0], dtype=np.float64)

    def restorer(lr, coeffs, basis, scale):
        out = dan.restorer(
            Tensor(lr[None].astype(dan.dtype)),
            Tensor(np.asarray(coeffs, dtype=dan.dtype)[None]),
        )
        return np.asarray(out.data[0], dtype=np.float64)

    return estimator, restorer
