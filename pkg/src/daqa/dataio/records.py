"""Core data records shared across the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field


class DataError(Exception):
    """Base error for dataset ingestion and example building."""


@dataclass(frozen=True)
class RawRecord:
    """One (passage, question, answers) triplet as ingested."""

    context: str
    question: str
    answers: tuple[str, ...]
    qid: str
    dataset_name: str

    def __post_init__(self):
        if not self.answers:
            raise DataError(f"record {self.qid} has no answers")


@dataclass(frozen=True)
class Chunk:
    """A windowed view of a passage; `offset` is in passage tokens."""

    offset: int
    ids: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.ids)

    def contains(self, start: int, end: int) -> bool:
        """Whether the passage-level token span [start, end] fits entirely inside."""
        return self.offset <= start and end < self.offset + len(self.ids)


@dataclass(frozen=True)
class QAExample:
    """One trainable chunk: token ids plus the chunk-local gold span."""

    question_ids: tuple[int, ...]
    passage_ids: tuple[int, ...]
    answer_start: int
    answer_end: int
    domain_label: int
    qid: str
    chunk_offset: int

    def __post_init__(self):
        if not 0 <= self.answer_start <= self.answer_end < len(self.passage_ids):
            raise DataError(
                f"{self.qid}: span ({self.answer_start}, {self.answer_end}) outside "
                f"chunk of {len(self.passage_ids)} tokens")


@dataclass(frozen=True)
class EvalExample:
    """One decodable chunk kept for inference, answer span not required."""

    question_ids: tuple[int, ...]
    passage_ids: tuple[int, ...]
    passage_tokens: tuple[str, ...]
    qid: str
    chunk_offset: int
    golds: tuple[str, ...]


@dataclass
class DatasetRegistry:
    """Named in-domain datasets (domain label = position) plus held-out ones."""

    in_domain: dict[str, list[RawRecord]] = field(default_factory=dict)
    out_of_domain: dict[str, list[RawRecord]] = field(default_factory=dict)

    @property
    def num_domains(self) -> int:
        return len(self.in_domain)

    def domain_label(self, name: str) -> int:
        return list(self.in_domain).index(name)

    def require_adversarial_ready(self) -> None:
        if self.num_domains < 2:
            raise DataError(
                f"adversarial training needs K >= 2 in-domain datasets, got {self.num_domains}")
