"""Class-balanced stratified mini-batching across K domains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence, TypeVar

import numpy as np

T = TypeVar("T")


class SamplerError(Exception):
    pass


@dataclass(frozen=True)
class StratifiedPlan:
    """Per-domain quotas for one batch; quotas differ by at most one."""

    quotas: tuple[int, ...]
    batch_size: int
    rng_seed: int

    def __post_init__(self):
        if sum(self.quotas) != self.batch_size:
            raise SamplerError("quotas must sum to batch_size")
        if max(self.quotas) - min(self.quotas) > 1:
            raise SamplerError("quotas must be balanced within one")


def make_quotas(k: int, batch_size: int) -> tuple[int, ...]:
    """floor(B/K) each; the B mod K remainder goes to the lowest indices."""
    if k < 1:
        raise SamplerError("need at least one domain")
    if batch_size < k:
        raise SamplerError(
            f"batch_size {batch_size} < K {k}: cannot include all domains")
    base, extra = divmod(batch_size, k)
    return tuple(base + (1 if d < extra else 0) for d in range(k))


class _DomainStream:
    """Endless seed-shuffled pass over one domain; reshuffles on exhaustion."""

    def __init__(self, items: Sequence[T], rng: np.random.Generator):
        if not items:
            raise SamplerError("empty domain")
        self._items = items
        self._rng = rng
        self._order = rng.permutation(len(items))
        self._pos = 0

    def take(self, n: int) -> list[T]:
        out = []
        while len(out) < n:
            if self._pos == len(self._order):
                self._order = self._rng.permutation(len(self._items))
                self._pos = 0
            out.append(self._items[self._order[self._pos]])
            self._pos += 1
        return out


def batches_per_epoch(domain_sizes: Sequence[int], batch_size: int) -> int:
    """Batches until the slowest-exhausting domain has been fully consumed."""
    quotas = make_quotas(len(domain_sizes), batch_size)
    return max(math.ceil(n / q) for n, q in zip(domain_sizes, quotas))


def stratified_batches(examples_by_domain: Sequence[Sequence[T]],
                       batch_size: int, seed: int) -> Iterator[list[T]]:
    """One epoch of balanced batches; a pure function of its arguments.

    Each batch holds exactly quota[d] examples of domain d. Domains are
    consumed in a seed-shuffled order and restart with a fresh shuffle when
    exhausted, so smaller domains are resampled; the epoch ends once the
    largest (slowest) domain has been consumed in full.
    """
    k = len(examples_by_domain)
    quotas = make_quotas(k, batch_size)
    streams = [_DomainStream(items, np.random.default_rng([seed, d]))
               for d, items in enumerate(examples_by_domain)]
    n_batches = batches_per_epoch([len(items) for items in examples_by_domain],
                                  batch_size)
    for _ in range(n_batches):
        batch: list[T] = []
        for stream, quota in zip(streams, quotas):
            batch.extend(stream.take(quota))
        yield batch
