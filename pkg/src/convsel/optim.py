"""Adam with bias correction and decoupled L2 weight decay, plus
parameter clipping for Lipschitz-constrained critics."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Adam:
    """Standard Adam update per parameter, with decoupled weight decay:

        m <- b1 m + (1-b1) g       v <- b2 v + (1-b2) g^2
        w <- w - alpha (m_hat / (sqrt(v_hat) + eps) + decay * w)

    ``step`` mutates the parameter tensors in place; parameters absent
    from the gradient map are treated as having zero gradient.
    """

    def __init__(self, params: list[Tensor], alpha: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: dict[Tensor, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for i, p in enumerate(self.params):
            g = grads.get(p)
            if g is None:
                g = np.zeros_like(p.data)
            elif not np.all(np.isfinite(g)):
                raise FloatingPointError(
                    f"non-finite gradient for parameter {p.name or '<unnamed>'} at step {self.t}")
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * (g * g)
            m_hat = self._m[i] / bc1
            v_hat = self._v[i] / bc2
            update = m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay:
                update = update + self.weight_decay * p.data
            p.data -= self.alpha * update


def clip_params(params: list[Tensor], c: float) -> list[Tensor]:
    """Clamp every parameter entry to [-c, c] in place. Idempotent."""
    if c <= 0:
        raise ValueError(f"clip range must be positive, got {c}")
    for p in params:
        np.clip(p.data, -c, c, out=p.data)
    return params
