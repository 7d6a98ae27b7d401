"""Adaptive-moment optimizer and global-norm gradient clipping."""

from __future__ import annotations

import math

import numpy as np

from ..diffcore import Tensor


class Adam:
    """Standard Adam with bias correction, no weight decay.

    A parameter whose gradient buffer is absent (disconnected this step)
    contributes a zero gradient; with zero moments that leaves it unchanged.
    """

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else 0.0
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {"t": np.array([self.t], dtype=np.int64)}
        for name in self.params:
            out[f"m/{name}"] = self.m[name]
            out[f"v/{name}"] = self.v[name]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["t"][0])
        for name in self.params:
            self.m[name] = np.array(arrays[f"m/{name}"])
            self.v[name] = np.array(arrays[f"v/{name}"])


def clip_global_norm(params: dict[str, Tensor], max_norm: float) -> tuple[float, bool]:
    """Scale all gradients so their joint L2 norm is at most `max_norm`.

    Returns (pre-clip norm, whether clipping engaged).
    """
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad)))
    norm = math.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return norm, False
    scale = max_norm / norm
    for p in params.values():
        if p.grad is not None:
            # Allocates: a grad buffer may be shared with another tensor.
            p.grad = p.grad * scale
    return norm, True
