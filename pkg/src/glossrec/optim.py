"""Adam with bias correction and per-partition learning rates."""

from __future__ import annotations

import numpy as np

from .errors import DivergenceError


class Adam:
    """Standard first/second-moment update; one shared step counter.

    lr can be a float or a dict mapping parameter name -> rate, which is how
    the front-end partition gets its own learning rate. A rate of 0 leaves
    those parameters bit-identical (moments still decay).
    """

    def __init__(self, param_names, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray | None] = {n: None for n in param_names}
        self.v: dict[str, np.ndarray | None] = {n: None for n in param_names}

    def step(self, params: dict, grads: dict, lr) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient in {name}")
            if self.m[name] is None:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m += (1.0 - self.beta1) * (g - m)
            v += (1.0 - self.beta2) * (g * g - v)
            rate = lr[name] if isinstance(lr, dict) else lr
            p -= rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
