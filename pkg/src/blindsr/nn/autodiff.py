"""Minimal reverse-mode automatic differentiation on 4-D numpy arrays.

A Tensor wraps a value array and, after backward(), a gradient of the same
shape.  Ops build a tape of backward closures; backward() walks the tape in
reverse topological order.  Everything is plain numpy, so runs are
deterministic given the input arrays.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor",
    "add",
    "mul",
    "concat",
    "relu",
    "sigmoid",
    "conv2d",
    "spatial_mean",
    "pixel_shuffle",
    "stretch2d",
    "l1_loss",
]


class Tensor:
    """Value plus gradient accumulator, linked to its parents on the tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar (or any) output, seeding grad 1."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to the given shape (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def concat(a: Tensor, b: Tensor, axis: int = 1) -> Tensor:
    out_data = np.concatenate([a.data, b.data], axis=axis)
    split = a.data.shape[axis]

    def backward(g):
        ga, gb = np.split(g, [split], axis=axis)
        if a.requires_grad:
            a.accumulate(ga)
        if b.requires_grad:
            b.accumulate(gb)

    return Tensor(out_data, _parents=(a, b), _backward=backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out_data = np.where(mask, x.data, 0.0).astype(x.dtype)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * mask)

    return Tensor(out_data, _parents=(x,), _backward=backward)


def sigmoid(x: Tensor) -> Tensor:
    # exp of -|x| only, to avoid overflow on large negative inputs
    e = np.exp(-np.abs(x.data))
    out_data = np.where(x.data >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * out_data * (1.0 - out_data))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1, pad: int | None = None) -> Tensor:
    """2-D cross-correlation with bias (zero padding, square kernel).

    x: (N, Cin, H, W), w: (Cout, Cin, kh, kw), b: (Cout,).  The default
    padding kh//2 preserves spatial dims at stride 1.
    """
    n, cin, h, win = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin != cin_w:
        raise ValueError(f"channel mismatch: input {cin}, weight expects {cin_w}")
    p = kh // 2 if pad is None else pad
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    h_out = (h + 2 * p - kh) // stride + 1
    w_out = (win + 2 * p - kw) // stride + 1
    view = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(view.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * h_out * w_out, cin * kh * kw
    )
    w_mat = w.data.reshape(cout, cin * kh * kw)
    out_data = (cols @ w_mat.T + b.data).reshape(n, h_out, w_out, cout).transpose(0, 3, 1, 2)
    out_data = np.ascontiguousarray(out_data)

    def backward(g):
        g_mat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * h_out * w_out, cout)
        if b.requires_grad:
            b.accumulate(g_mat.sum(axis=0))
        if w.requires_grad:
            w.accumulate((g_mat.T @ cols).reshape(w.data.shape))
        if x.requires_grad:
            g_cols = (g_mat @ w_mat).reshape(n, h_out, w_out, cin, kh, kw)
            g_cols = g_cols.transpose(0, 3, 1, 2, 4, 5)
            gxp = np.zeros_like(xp)
            for a in range(kh):
                for c in range(kw):
                    gxp[
                        :, :, a : a + stride * h_out : stride, c : c + stride * w_out : stride
                    ] += g_cols[:, :, :, :, a, c]
            if p:
                gxp = gxp[:, :, p:-p, p:-p]
            x.accumulate(gxp)

    return Tensor(out_data, _parents=(x, w, b), _backward=backward)


def spatial_mean(x: Tensor, keepdims: bool = False) -> Tensor:
    """Mean over the spatial axes: (N, C, H, W) -> (N, C) or (N, C, 1, 1)."""
    n, c, h, w = x.data.shape
    out_data = x.data.mean(axis=(2, 3), keepdims=keepdims)

    def backward(g):
        if x.requires_grad:
            gg = g if keepdims else g[:, :, None, None]
            x.accumulate(np.broadcast_to(gg / (h * w), x.data.shape).astype(x.dtype))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Depth-to-space: (N, C*r^2, H, W) -> (N, C, H*r, W*r).

    out[n, c, h*r+a, w*r+b] = in[n, c*r^2 + a*r + b, h, w].
    """
    n, cr2, h, w = x.data.shape
    if cr2 % (r * r):
        raise ValueError(f"channels {cr2} not divisible by r^2 = {r * r}")
    c = cr2 // (r * r)
    out_data = np.ascontiguousarray(
        x.data.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)
    )

    def backward(g):
        if x.requires_grad:
            gx = (
                g.reshape(n, c, h, r, w, r)
                .transpose(0, 1, 3, 5, 2, 4)
                .reshape(n, cr2, h, w)
            )
            x.accumulate(np.ascontiguousarray(gx))

    return Tensor(out_data, _parents=(x,), _backward=backward)


def stretch2d(coeffs: Tensor, h: int, w: int) -> Tensor:
    """Broadcast per-sample coefficients (N, m) to constant maps (N, m, h, w)."""
    if h < 1 or w < 1:
        raise ValueError(f"target dims must be >= 1, got {h}x{w}")
    out_data = np.ascontiguousarray(
        np.broadcast_to(coeffs.data[:, :, None, None], coeffs.data.shape + (h, w))
    )

    def backward(g):
        if coeffs.requires_grad:
            coeffs.accumulate(g.sum(axis=(2, 3)))

    return Tensor(out_data, _parents=(coeffs,), _backward=backward)


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference; subgradient 0 at ties."""
    diff = a.data - b.data
    out_data = np.asarray(np.mean(np.abs(diff)), dtype=a.dtype)
    scale = 1.0 / diff.size

    def backward(g):
        s = np.sign(diff) * (g * scale)
        if a.requires_grad:
            a.accumulate(_unbroadcast(s, a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-s, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=backward)
