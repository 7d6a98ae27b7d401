"""Differentiable primitives over :class:`~daqa.diffcore.tensor.Tensor`.

All ops are pure functions: they never mutate inputs, record themselves on
the active tape when any input requires a gradient, and run as plain forward
computation when no tape is active (inference mode).

Probabilities entering any log are clamped to [PROB_FLOOR, 1]; the KL and
cross-entropy losses would otherwise diverge as a probability approaches 0.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

from .tensor import DiffcoreError, ShapeError, Tensor, active_tape

PROB_FLOOR = 1e-12


class ValidationError(DiffcoreError):
    """Raised when an op's numeric precondition is violated."""


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = active_tape()
    recording = tape is not None and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=recording)
    if recording:
        tape.record(out, parents, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` down to `shape`, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    keep = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if keep:
        g = g.sum(axis=keep, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        a_ = _as_tensor(a)
        data = a_.data + b

        def backward(g):
            a_.accumulate_grad(g)

        return _make(data, (a_,), backward)

    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        a_ = _as_tensor(a)
        data = a_.data * b

        def backward(g):
            a_.accumulate_grad(g * b)

        return _make(data, (a_,), backward)

    a, b = _as_tensor(a), _as_tensor(b)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return mul(a, -1.0)


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor) and np.isscalar(b):
        return add(a, -b)
    return add(a, neg(b))


# ---------------------------------------------------------------------------
# linear algebra and shape


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; inputs either both 2-D or stacked with equal batch dims."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} @ {b.shape}")
    if a.ndim != b.ndim or (a.ndim > 2 and a.shape[:-2] != b.shape[:-2]):
        raise ShapeError(f"matmul batch dims must match, got {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.swapaxes(-1, -2))
        if b.requires_grad:
            b.accumulate_grad(a.data.swapaxes(-1, -2) @ g)

    return _make(data, (a, b), backward)


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        a.accumulate_grad(g.reshape(a.shape))

    return _make(data, (a,), backward)


def transpose(a: Tensor, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    data = a.data.transpose(axes)

    def backward(g):
        a.accumulate_grad(g.transpose(inverse))

    return _make(data, (a,), backward)


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup (embedding): out[..., :] = table[ids[...], :]."""
    table = _as_tensor(table)
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("gather_rows ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError("gather_rows id out of range")
    data = table.data[ids]

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        table.accumulate_grad(gt)

    return _make(data, (table,), backward)


def select_index(a: Tensor, axis: int, index: int) -> Tensor:
    """Index one position along `axis`, dropping that axis."""
    a = _as_tensor(a)
    data = np.take(a.data, index, axis=axis)

    def backward(g):
        ga = np.zeros_like(a.data)
        key = [slice(None)] * a.ndim
        key[axis] = index
        ga[tuple(key)] = g
        a.accumulate_grad(ga)

    return _make(data, (a,), backward)


# ---------------------------------------------------------------------------
# reductions


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            ga = np.broadcast_to(g.reshape((1,) * a.ndim), a.shape)
        elif keepdims:
            ga = np.broadcast_to(g, a.shape)
        else:
            ga = np.broadcast_to(np.expand_dims(g, axis), a.shape)
        a.accumulate_grad(np.ascontiguousarray(ga))

    return _make(data, (a,), backward)


def mean_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------
# nonlinearities and normalization


def relu(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    data = np.maximum(a.data, 0.0)

    def backward(g):
        a.accumulate_grad(g * (a.data > 0))

    return _make(data, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    a = _as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    data = x * cdf

    def backward(g):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        a.accumulate_grad(g * (cdf + x * pdf))

    return _make(data, (a,), backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values into [lo, hi]; gradient passes only where input is in range."""
    a = _as_tensor(a)
    data = np.clip(a.data, lo, hi)

    def backward(g):
        a.accumulate_grad(g * ((a.data >= lo) & (a.data <= hi)))

    return _make(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if np.any(a.data <= 0.0):
        raise ValidationError("log requires strictly positive input; clamp first")
    data = np.log(a.data)

    def backward(g):
        a.accumulate_grad(g / a.data)

    return _make(data, (a,), backward)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor | None = None,
               eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply a learned gain (and bias, if given)."""
    a, gain = _as_tensor(a), _as_tensor(gain)
    n = a.shape[-1]
    if gain.shape != (n,) or (bias is not None and bias.shape != (n,)):
        raise ShapeError("layer_norm gain/bias must match the last axis")
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv_std
    data = gain.data * xhat + bias.data if bias is not None else gain.data * xhat

    def backward(g):
        if a.requires_grad:
            dxhat = g * gain.data
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad(inv_std * (dxhat - m1 - xhat * m2))
        if gain.requires_grad:
            gain.accumulate_grad((g * xhat).reshape(-1, n).sum(axis=0))
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g.reshape(-1, n).sum(axis=0))

    parents = (a, gain) if bias is None else (a, gain, bias)
    return _make(data, parents, backward)


def dropout(a: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate == 0."""
    if rate == 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValidationError(f"dropout rate must be in [0, 1), got {rate}")
    keep = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return mul(a, Tensor(keep.astype(a.dtype)))


# ---------------------------------------------------------------------------
# probability ops


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    a = _as_tensor(a)
    if a.ndim == 0 or a.shape[-1] < 1:
        raise ShapeError("softmax needs a non-empty last axis")
    if not np.all(np.isfinite(a.data)):
        raise ValidationError("softmax input must be finite")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        a.accumulate_grad(p * (g - inner))

    return _make(p, (a,), backward)


def log_softmax(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    if a.ndim == 0 or a.shape[-1] < 1:
        raise ShapeError("log_softmax needs a non-empty last axis")
    z = a.data - a.data.max(axis=-1, keepdims=True)
    ls = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))

    def backward(g):
        a.accumulate_grad(g - np.exp(ls) * g.sum(axis=-1, keepdims=True))

    return _make(ls, (a,), backward)


def pick(a: Tensor, indices: np.ndarray) -> Tensor:
    """Select one entry along the last axis per leading position."""
    a = _as_tensor(a)
    idx = np.asarray(indices)
    if idx.shape != a.shape[:-1]:
        raise ShapeError(f"pick indices shape {idx.shape} != leading shape {a.shape[:-1]}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[-1]):
        raise IndexError("pick index out of range")
    expanded = np.expand_dims(idx, -1)
    data = np.take_along_axis(a.data, expanded, axis=-1).squeeze(-1)

    def backward(g):
        ga = np.zeros_like(a.data)
        np.put_along_axis(ga, expanded, np.expand_dims(g, -1), axis=-1)
        a.accumulate_grad(ga)

    return _make(data, (a,), backward)


def cross_entropy(logits: Tensor, target) -> Tensor:
    """Negative log-likelihood of `target` under softmax(logits).

    1-D logits with an integer target give a scalar; (N, M) logits with an
    (N,) target vector give the per-row losses.
    """
    logits = _as_tensor(logits)
    idx = np.asarray(target)
    if logits.ndim == 1:
        if idx.shape != ():
            raise ShapeError("scalar target expected for 1-D logits")
        if not 0 <= int(idx) < logits.shape[-1]:
            raise IndexError(f"target {int(idx)} out of range for {logits.shape[-1]} classes")
        return neg(pick(log_softmax(logits), idx))
    return neg(pick(log_softmax(logits), idx))


def kl_uniform(probs: Tensor) -> Tensor:
    """KL(U || P) against the uniform distribution over the last axis.

    Equals -log K - (1/K) * sum_i log p_i; zero iff P is uniform. Rows must
    already be normalized (sum to 1 within 1e-6). 1-D input gives a scalar,
    (N, K) input gives per-row divergences.
    """
    probs = _as_tensor(probs)
    k = probs.shape[-1]
    if k < 1:
        raise ShapeError("kl_uniform needs a non-empty last axis")
    sums = probs.data.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValidationError("kl_uniform input rows must sum to 1 within 1e-6")
    mean_log = mean_(log(clamp(probs, PROB_FLOOR, 1.0)), axis=-1)
    # Rounding can land a hair below zero at exactly-uniform input; floor it.
    return clamp(add(neg(mean_log), -math.log(k)), 0.0, np.inf)


def attention(q: Tensor, k: Tensor, v: Tensor, additive_mask: Tensor | None = None) -> Tensor:
    """Scaled dot-product attention with optional additive masking, fused.

    q, k, v: (..., T, d_head). `additive_mask` broadcasts against the
    (..., T, T) score matrix; masked positions should hold a large negative.
    One primitive rather than a matmul/softmax chain: the score matrix is
    the dominant allocation and this keeps a single copy of it alive.
    """
    q, k, v = _as_tensor(q), _as_tensor(k), _as_tensor(v)
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = (q.data @ k.data.swapaxes(-1, -2)) * scale
    if additive_mask is not None:
        scores += additive_mask.data
    scores -= scores.max(axis=-1, keepdims=True)
    np.exp(scores, out=scores)
    scores /= scores.sum(axis=-1, keepdims=True)
    weights = scores
    data = weights @ v.data

    def backward(g):
        if v.requires_grad:
            v.accumulate_grad(weights.swapaxes(-1, -2) @ g)
        if q.requires_grad or k.requires_grad:
            dw = g @ v.data.swapaxes(-1, -2)
            ds = weights * (dw - (dw * weights).sum(axis=-1, keepdims=True))
            if q.requires_grad:
                q.accumulate_grad((ds @ k.data) * scale)
            if k.requires_grad:
                k.accumulate_grad((ds.swapaxes(-1, -2) @ q.data) * scale)

    return _make(data, (q, k, v), backward)
