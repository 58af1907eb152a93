"""Adam optimizer with bias-corrected moment estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


class Adam:
    """Holds one (m, v) moment pair per named parameter; updates in place."""

    def __init__(self, params: dict, cfg: AdamConfig | None = None):
        self.cfg = cfg or AdamConfig()
        self.m = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.v = {name: np.zeros_like(arr) for name, arr in params.items()}
        self.step_count = 0

    def step(self, params: dict, grads: dict) -> None:
        if set(params) != set(self.m) or set(grads) != set(self.m):
            raise ShapeError("parameter/gradient names do not match optimizer state")
        self.step_count += 1
        c = self.cfg
        bc1 = 1.0 - c.beta1**self.step_count
        bc2 = 1.0 - c.beta2**self.step_count
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"{name}: gradient shape {g.shape} != parameter {p.shape}")
            m, v = self.m[name], self.v[name]
            m[...] = c.beta1 * m + (1.0 - c.beta1) * g
            v[...] = c.beta2 * v + (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.epsilon)
