"""Sliding-window chunking of long passages."""

from __future__ import annotations

from typing import Sequence

from .records import Chunk


def chunk_passage(passage_ids: Sequence[int], max_passage_len: int = 384,
                  stride: int = 128) -> list[Chunk]:
    """Windows at offsets 0, stride, 2*stride, ...

    Generation stops at the first offset whose window reaches the end of the
    passage, so every token lands in at least one chunk and consecutive
    offsets differ by exactly `stride`.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if max_passage_len < stride:
        raise ValueError("max_passage_len must be >= stride")
    ids = tuple(passage_ids)
    if not ids:
        return []
    chunks = []
    offset = 0
    while True:
        chunks.append(Chunk(offset=offset, ids=ids[offset:offset + max_passage_len]))
        if offset + max_passage_len >= len(ids):
            return chunks
        offset += stride
