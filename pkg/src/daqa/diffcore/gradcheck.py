"""Finite-difference validation of analytic gradients."""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .tensor import DiffcoreError, Tape, Tensor


class GradCheckError(DiffcoreError):
    """Raised when the checked function cannot be evaluated."""


def grad_check(f: Callable[[], Tensor], params: Iterable[Tensor],
               eps: float = 1e-3) -> float:
    """Max relative error between analytic and central-difference gradients.

    `f` must rebuild the scalar loss from scratch on each call, closing over
    `params`. Analytic gradients come from one taped backward pass; numeric
    gradients perturb each parameter entry by +/- eps. Parameters must be
    64-bit for the O(eps^2) difference error to sit below the tolerance
    callers assert. Relative error for each entry is
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    """
    params = list(params)
    for p in params:
        if p.data.dtype != np.float64:
            raise GradCheckError("grad_check requires float64 parameters")
        p.zero_grad()

    with Tape() as tape:
        out = f()
    if out.data.size != 1:
        raise GradCheckError(f"f must return a scalar, got shape {out.shape}")
    if not np.isfinite(out.data).all():
        raise GradCheckError("f evaluated to a non-finite value")
    tape.backward(out)

    # Parameters with no path to the loss have a gradient of exactly zero.
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        ana_flat = ana.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(f().data.reshape(()))
            flat[i] = orig - eps
            f_minus = float(f().data.reshape(()))
            flat[i] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise GradCheckError("f evaluated to a non-finite value under perturbation")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            denom = max(abs(ana_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(ana_flat[i] - numeric) / denom)
        p.zero_grad()
    return worst
