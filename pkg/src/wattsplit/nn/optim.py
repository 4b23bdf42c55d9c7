"""Adaptive-moment optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from wattsplit.errors import TrainingError


class Adam:
    """Classic Adam; moment state is keyed by parameter name.

    step() updates the parameter arrays in place, so the same arrays the
    network computes with are advanced. Updates are deterministic given
    the gradient sequence.
    """

    def __init__(self, step_size=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if step_size <= 0:
            raise ValueError("step_size must be positive")
        self.step_size = step_size
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: list[tuple[str, np.ndarray]],
             grads: list[tuple[str, np.ndarray]]) -> None:
        grad_map = dict(grads)
        self.t += 1
        for name, p in params:
            g = grad_map[name]
            if g.shape != p.shape:
                raise ValueError(f"{name}: gradient shape {g.shape} != parameter {p.shape}")
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in {name}; training aborted")
            dt = p.dtype.type
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= dt(self.beta1)
            m += dt(1 - self.beta1) * g
            v *= dt(self.beta2)
            v += dt(1 - self.beta2) * g * g
            m_hat = m / dt(1 - self.beta1 ** self.t)
            v_hat = v / dt(1 - self.beta2 ** self.t)
            p -= dt(self.step_size) * m_hat / (np.sqrt(v_hat) + dt(self.epsilon))
