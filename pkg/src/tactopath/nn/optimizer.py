"""AdaBound: Adam-style moments with per-element learning rates clipped
between bounds that squeeze toward a final SGD-like rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def lower_bound(t: int, final_lr: float, gamma: float) -> float:
    return final_lr * (1.0 - 1.0 / (gamma * t + 1.0))


def upper_bound(t: int, final_lr: float, gamma: float) -> float:
    return final_lr * (1.0 + 1.0 / (gamma * t))


@dataclass
class AdaBound:
    lr: float = 0.001
    final_lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gamma: float = 1e-3
    # optional pinned bounds; when set, both bounds equal this constant
    pinned_rate: float | None = None

    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    last_rates: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        t = self.t
        if self.pinned_rate is not None:
            lo = hi = self.pinned_rate
        else:
            lo = lower_bound(t, self.final_lr, self.gamma)
            hi = upper_bound(t, self.final_lr, self.gamma)
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for name, p in params.items():
            g = grads[name]
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            rate = np.clip(self.lr / (np.sqrt(v_hat) + self.eps), lo, hi)
            self.last_rates[name] = rate
            p -= rate * m_hat
