"""Answer-span location and gold-span selection."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

SENTENCE_ENDERS = frozenset({".", "!", "?"})


def find_answer_spans(passage_ids: Sequence[int],
                      answer_ids: Sequence[int]) -> list[tuple[int, int]]:
    """All exact contiguous matches as inclusive (start, end), in order."""
    if not answer_ids:
        raise ValueError("answer_ids must be non-empty")
    n, m = len(passage_ids), len(answer_ids)
    answer = tuple(answer_ids)
    return [(i, i + m - 1) for i in range(n - m + 1)
            if tuple(passage_ids[i:i + m]) == answer]


@dataclass(frozen=True)
class Sentence:
    """Inclusive token range of one passage sentence, with its surface tokens."""

    start: int
    end: int
    tokens: tuple[str, ...]

    def contains(self, span: tuple[int, int]) -> bool:
        return self.start <= span[0] and span[1] <= self.end


def split_sentences(tokens: Sequence[str]) -> list[Sentence]:
    """Segment on sentence-ending punctuation tokens (. ! ?)."""
    sentences = []
    start = 0
    for i, tok in enumerate(tokens):
        if tok in SENTENCE_ENDERS:
            sentences.append(Sentence(start, i, tuple(tokens[start:i + 1])))
            start = i + 1
    if start < len(tokens):
        sentences.append(Sentence(start, len(tokens) - 1, tuple(tokens[start:])))
    return sentences


def _cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b[tok] for tok, count in a.items())
    if dot == 0:
        return 0.0
    norm = math.sqrt(sum(c * c for c in a.values())) * math.sqrt(sum(c * c for c in b.values()))
    return dot / norm


def select_gold_span(spans: Sequence[tuple[int, int]], mode: str,
                     question_tokens: Sequence[str],
                     sentences: Sequence[Sentence]) -> tuple[int, int]:
    """Pick the training span among all matches of the answer text.

    mode="first" takes the earliest occurrence. mode="refine" embeds the
    question and each sentence as term-frequency vectors and keeps the span
    whose sentence is most similar to the question (cosine), ties broken by
    earliest span; it falls back to the first occurrence when no sentence
    contains a span.
    """
    if not spans:
        raise ValueError("spans must be non-empty")
    if mode == "first":
        return spans[0]
    if mode != "refine":
        raise ValueError(f"unknown gold mode {mode!r}")

    q_vec = Counter(question_tokens)
    best: tuple[int, int] | None = None
    best_score = -1.0
    for span in spans:
        sentence = next((s for s in sentences if s.contains(span)), None)
        if sentence is None:
            continue
        score = _cosine(q_vec, Counter(sentence.tokens))
        if score > best_score:
            best, best_score = span, score
    return best if best is not None else spans[0]
