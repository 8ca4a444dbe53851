"""AdamW over named numpy parameter dictionaries."""

import numpy as np


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


class AdamW:
    """Adam with decoupled weight decay.

    Parameters are updated out of place: `step` returns a new dictionary and
    never mutates arrays a caller may still hold.
    """

    def __init__(
        self,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
        max_grad_norm: float | None = None,
    ) -> None:
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.max_grad_norm = max_grad_norm
        self.steps = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(
        self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
    ) -> dict[str, np.ndarray]:
        if self.max_grad_norm is not None:
            norm = global_norm(grads)
            if norm > self.max_grad_norm:
                grads = {k: g * (self.max_grad_norm / norm) for k, g in grads.items()}

        self.steps += 1
        correction1 = 1.0 - self.beta1**self.steps
        correction2 = 1.0 - self.beta2**self.steps

        updated = {}
        for name, value in params.items():
            g = grads[name]
            m = self._m.get(name, np.zeros_like(value))
            v = self._v.get(name, np.zeros_like(value))
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[name], self._v[name] = m, v

            step = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            decayed = value * (1.0 - self.lr * self.weight_decay)
            updated[name] = decayed - self.lr * step
        return updated
