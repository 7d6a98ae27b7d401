"""Dense tensors and the computation tape for reverse-mode differentiation.

Operations record themselves on the active tape (see :mod:`daqa.diffcore.ops`).
Execution order is a valid topological order of the graph, so the backward
pass is a single reverse sweep over the recorded nodes.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

FLOAT_DTYPES = (np.float32, np.float64)


class DiffcoreError(Exception):
    """Base error for the differentiable substrate."""


class ShapeError(DiffcoreError):
    """Raised when an operation receives incompatibly shaped inputs."""


class TapeError(DiffcoreError):
    """Raised on tape misuse, e.g. running backward twice."""


class Tensor:
    """A dense float tensor with an optional gradient buffer.

    `data` is a row-major numpy array (float32 or float64). `grad` is lazily
    allocated during the backward pass and always matches `data`'s shape.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a scalar, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A view of the same values that blocks gradient flow."""
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if g.shape != self.data.shape:
            raise ShapeError(
                f"gradient shape {g.shape} does not match data shape {self.data.shape}"
            )
        if g.dtype != self.data.dtype:
            g = g.astype(self.data.dtype)
        if self.grad is None:
            # May alias the producer's buffer; safe because a node's grad
            # never changes after its backward fires, and further
            # accumulation below allocates instead of mutating.
            self.grad = g
        else:
            self.grad = self.grad + g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class _Node:
    """One executed differentiable operation: output plus its pullback."""

    __slots__ = ("out", "parents", "backward_fn")

    def __init__(self, out: Tensor, parents: Sequence[Tensor],
                 backward_fn: Callable[[np.ndarray], None]):
        self.out = out
        self.parents = parents
        self.backward_fn = backward_fn


_tls = threading.local()


def active_tape() -> "Tape | None":
    return getattr(_tls, "tape", None)


class Tape:
    """Ordered record of executed differentiable operations.

    One tape belongs to one thread; independent tapes may run concurrently.
    Entering the context makes the tape active so ops record onto it.
    """

    def __init__(self):
        self._nodes: list[_Node] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        if active_tape() is not None:
            raise TapeError("a tape is already active on this thread")
        _tls.tape = self
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tls.tape = None

    def record(self, out: Tensor, parents: Sequence[Tensor],
               backward_fn: Callable[[np.ndarray], None]) -> None:
        self._nodes.append(_Node(out, parents, backward_fn))

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, root: Tensor) -> None:
        """Propagate d(root)/d(leaf) into every reachable requires_grad leaf.

        Visits recorded nodes in reverse execution order, which is reverse
        topological order by construction. A tape can run backward once.
        """
        if self._spent:
            raise TapeError("backward already ran on this tape; build a new tape")
        self._spent = True
        if root.data.size != 1:
            raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
        if not root.requires_grad:
            # Nothing on the tape feeds this value; no gradient buffers appear.
            return
        root.accumulate_grad(np.ones_like(root.data))
        for node in reversed(self._nodes):
            if node.out.grad is None:
                continue
            node.backward_fn(node.out.grad)
