"""Differentiable building blocks on float64 numpy arrays.

Feature maps are channels-last (B, H, W, C), the same layout volumes use
on disk, so the model never transposes.  Convolutions run as im2col plus
a single GEMM per direction.  Each layer caches what it needs during
forward and accumulates parameter gradients in backward; `zero_grad`
resets the accumulators.  Weights use He-uniform init, biases start at
zero.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _im2col(x: np.ndarray) -> np.ndarray:
    """(B, H+2, W+2, C) padded input -> (B*H*W, C*9) patch matrix."""
    win = sliding_window_view(x, (3, 3), axis=(1, 2))  # (B, H, W, C, 3, 3)
    b, h, w = win.shape[:3]
    return np.ascontiguousarray(win).reshape(b * h * w, -1)


class Conv2d:
    """3x3 convolution, stride 1, zero same-padding.

    Weights are stored (out_ch, in_ch, 3, 3); patch rows are flattened in
    (in_ch, ky, kx) order to match `w.reshape(out_ch, -1)`.
    """

    def __init__(self, in_ch: int, out_ch: int, rng: np.random.Generator):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.w = he_uniform(rng, (out_ch, in_ch, 3, 3), fan_in=in_ch * 9)
        self.b = np.zeros(out_ch)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cols = None
        self._shape = None

    def zero_grad(self):
        self.gw[...] = 0.0
        self.gb[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, h, w, _ = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        self._cols = _im2col(xp)
        self._shape = (b, h, w)
        out = self._cols @ self.w.reshape(self.out_ch, -1).T
        return out.reshape(b, h, w, self.out_ch) + self.b

    def backward(self, dout: np.ndarray) -> np.ndarray:
        b, h, w = self._shape
        dflat = dout.reshape(b * h * w, self.out_ch)
        self.gw += (dflat.T @ self._cols).reshape(self.w.shape)
        self.gb += dflat.sum(axis=0)
        # Input gradient is a correlation of dout with the flipped kernel,
        # rows flattened in (out_ch, ky, kx) order.
        dp = np.pad(dout, ((0, 0), (1, 1), (1, 1), (0, 0)))
        dcols = _im2col(dp)
        wf = self.w[:, :, ::-1, ::-1].transpose(0, 2, 3, 1).reshape(-1, self.in_ch)
        return (dcols @ wf).reshape(b, h, w, self.in_ch)


class Dense:
    """Fully connected layer, y = x @ w + b."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.w = he_uniform(rng, (in_dim, out_dim), fan_in=in_dim)
        self.b = np.zeros(out_dim)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._x = None

    def zero_grad(self):
        self.gw[...] = 0.0
        self.gb[...] = 0.0

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w + self.b

    def backward(self, dout: np.ndarray) -> np.ndarray:
        self.gw += self._x.T @ dout
        self.gb += dout.sum(axis=0)
        return dout @ self.w.T


class ReLU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0.0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._mask


class Sigmoid:
    def forward(self, x: np.ndarray) -> np.ndarray:
        # Evaluate each branch only where it is stable.
        pos = x >= 0
        ex = np.exp(np.where(pos, -x, x))
        self._s = np.where(pos, 1.0 / (1.0 + ex), ex / (1.0 + ex))
        return self._s

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._s * (1.0 - self._s)


class MaxPool2:
    """2x2 max pooling, stride 2; ties break to the first window element."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, h, w, c = x.shape
        win = (
            x.reshape(b, h // 2, 2, w // 2, 2, c)
            .transpose(0, 1, 3, 5, 2, 4)
            .reshape(b, h // 2, w // 2, c, 4)
        )
        self._idx = win.argmax(axis=-1)
        self._shape = x.shape
        return np.take_along_axis(win, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        b, hh, ww, c = dout.shape
        d = np.zeros((b, hh, ww, c, 4))
        np.put_along_axis(d, self._idx[..., None], dout[..., None], axis=-1)
        return (
            d.reshape(b, hh, ww, c, 2, 2)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(self._shape)
        )


class UpsampleNearest2:
    """Nearest-neighbour x2 upsampling."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        b, h, w, c = dout.shape
        return dout.reshape(b, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


class ConcatChannels:
    """Concatenate two feature maps along the channel axis."""

    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        self._split = a.shape[-1]
        return np.concatenate([a, b], axis=-1)

    def backward(self, dout: np.ndarray):
        return dout[..., : self._split], dout[..., self._split :]


class Flatten:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout.reshape(self._shape)
