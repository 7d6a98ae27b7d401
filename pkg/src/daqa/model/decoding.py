"""Extractive span decoding from start/end logits."""

from __future__ import annotations

import numpy as np

from .config import ModelError


class DecodeError(ModelError):
    pass


def decode_span(start_logits: np.ndarray, end_logits: np.ndarray,
                valid: np.ndarray, max_answer_len: int) -> tuple[int, int, float]:
    """Best pair s <= e < s + max_answer_len by start + end logit sum.

    Only positions with valid[i] may start or end a span. Ties break toward
    the smaller start, then the smaller end.
    """
    if max_answer_len < 1:
        raise DecodeError("max_answer_len must be >= 1")
    valid = np.asarray(valid, dtype=bool)
    t = len(start_logits)
    if t == 0 or not valid.any():
        raise DecodeError("no valid positions to decode")

    neg = -np.inf
    start_m = np.where(valid, start_logits, neg)
    end_m = np.where(valid, end_logits, neg)
    # windows[s] = end logits over [s, s + max_answer_len), padded past the end
    padded = np.concatenate([end_m, np.full(max_answer_len - 1, neg)])
    windows = np.lib.stride_tricks.sliding_window_view(padded, max_answer_len)
    best_e_off = windows.argmax(axis=1)          # first max: earliest end wins ties
    pair_scores = start_m + windows[np.arange(t), best_e_off]
    s = int(pair_scores.argmax())                # first max: earliest start wins ties
    if not np.isfinite(pair_scores[s]):
        raise DecodeError("no valid (start, end) pair within max_answer_len")
    e = s + int(best_e_off[s])
    return s, e, float(pair_scores[s])
