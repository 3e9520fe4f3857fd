"""Neural network layers with explicit forward/backward passes.

Everything runs in float64 so gradient checks against central finite
differences are meaningful. Batches are (N, C, H, W).
"""

from __future__ import annotations

import numpy as np


def conv_output_size(size: int, k: int, stride: int, dilation: int, pad: int) -> int:
    return (size + 2 * pad - dilation * (k - 1) - 1) // stride + 1


class Conv2d:
    """2-D convolution with stride and dilation, zero padding, im2col based."""

    def __init__(self, in_ch: int, out_ch: int, k: int = 3, stride: int = 1,
                 dilation: int = 1, pad: int | None = None,
                 rng: np.random.Generator | None = None, name: str = "conv"):
        self.in_ch, self.out_ch = in_ch, out_ch
        self.k, self.stride, self.dilation = k, stride, dilation
        # default padding preserves spatial dims at stride 1
        self.pad = dilation * (k - 1) // 2 if pad is None else pad
        self.name = name
        rng = rng or np.random.default_rng(0)
        fan_in = in_ch * k * k
        self.w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(out_ch, in_ch, k, k))
        self.b = np.zeros(out_ch)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        if c != self.in_ch:
            raise ValueError(f"{self.name}: expected {self.in_ch} channels, got {c}")
        oh = conv_output_size(h, self.k, self.stride, self.dilation, self.pad)
        ow = conv_output_size(w, self.k, self.stride, self.dilation, self.pad)
        xp = np.pad(x, ((0, 0), (0, 0), (self.pad, self.pad), (self.pad, self.pad)))
        d, s = self.dilation, self.stride
        patches = np.empty((n, c, self.k, self.k, oh, ow))
        for u in range(self.k):
            for v in range(self.k):
                patches[:, :, u, v] = xp[:, :, d * u : d * u + s * oh : s,
                                         d * v : d * v + s * ow : s]
        cols2d = patches.reshape(n, c * self.k * self.k, oh * ow)
        wmat = self.w.reshape(self.out_ch, -1)
        out = np.matmul(wmat, cols2d) + self.b[None, :, None]
        self._cache = (x.shape, xp.shape, cols2d, oh, ow)
        return out.reshape(n, self.out_ch, oh, ow)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x_shape, xp_shape, cols2d, oh, ow = self._cache
        n = x_shape[0]
        g = grad.reshape(n, self.out_ch, oh * ow)
        wmat = self.w.reshape(self.out_ch, -1)
        self.dw += np.matmul(g, cols2d.transpose(0, 2, 1)).sum(axis=0).reshape(self.w.shape)
        self.db += g.sum(axis=(0, 2))
        dcols = np.matmul(wmat.T, g)
        dpatches = dcols.reshape(n, self.in_ch, self.k, self.k, oh, ow)
        # scatter-add each of the k*k taps back onto its strided grid
        dxp = np.zeros(xp_shape)
        d, s = self.dilation, self.stride
        for u in range(self.k):
            for v in range(self.k):
                dxp[:, :, d * u : d * u + s * oh : s,
                    d * v : d * v + s * ow : s] += dpatches[:, :, u, v]
        if self.pad:
            return dxp[:, :, self.pad : -self.pad or None, self.pad : -self.pad or None]
        return dxp

    def params(self):
        yield f"{self.name}.w", self.w, self.dw
        yield f"{self.name}.b", self.b, self.db


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask

    def params(self):
        return iter(())


class GlobalAvgPool:
    def __init__(self):
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        n, c, h, w = self._shape
        return np.broadcast_to(grad[:, :, None, None], self._shape) / (h * w)

    def params(self):
        return iter(())


class Dense:
    def __init__(self, in_f: int, out_f: int, rng: np.random.Generator | None = None,
                 name: str = "dense"):
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, np.sqrt(2.0 / in_f), size=(in_f, out_f))
        self.b = np.zeros(out_f)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self.name = name
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad):
        self.dw += self._x.T @ grad
        self.db += grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        yield f"{self.name}.w", self.w, self.dw
        yield f"{self.name}.b", self.b, self.db


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over the batch; returns (loss, dlogits, probs)."""
    probs = softmax(logits)
    n = logits.shape[0]
    eps = 1e-300
    loss = -np.log(probs[np.arange(n), labels] + eps).mean()
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n, probs
