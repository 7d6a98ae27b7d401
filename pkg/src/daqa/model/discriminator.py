"""K-way domain discriminator over the pooled representation."""

from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, add, matmul, relu


def init_disc_params(d_model: int, n_domains: int, rng: np.random.Generator,
                     d_hidden: int | None = None, init_scale: float = 0.02,
                     dtype=np.float64) -> dict[str, Tensor]:
    """2-layer ReLU perceptron: d_model -> d_hidden -> K logits."""
    if n_domains < 2:
        raise ValueError("discriminator needs at least 2 domains")
    d_hidden = d_hidden or d_model
    return {
        "w1": Tensor(rng.normal(0.0, init_scale, size=(d_model, d_hidden)).astype(dtype),
                     requires_grad=True),
        "b1": Tensor(np.zeros(d_hidden, dtype=dtype), requires_grad=True),
        "w2": Tensor(rng.normal(0.0, init_scale, size=(d_hidden, n_domains)).astype(dtype),
                     requires_grad=True),
        "b2": Tensor(np.zeros(n_domains, dtype=dtype), requires_grad=True),
    }


def num_domains(disc_params: dict[str, Tensor]) -> int:
    return disc_params["w2"].shape[1]


def disc_forward(pooled_h: Tensor, disc_params: dict[str, Tensor]) -> Tensor:
    """Domain logits, shape (B, K) for (B, d) input or (K,) for (d,)."""
    hidden = relu(add(matmul_any(pooled_h, disc_params["w1"]), disc_params["b1"]))
    return add(matmul_any(hidden, disc_params["w2"]), disc_params["b2"])


def matmul_any(x: Tensor, w: Tensor) -> Tensor:
    """Matmul that also accepts a single 1-D feature vector."""
    from ..diffcore import reshape

    if x.ndim == 1:
        return reshape(matmul(reshape(x, (1, x.shape[0])), w), (w.shape[1],))
    return matmul(x, w)
