"""Per-dataset summary statistics."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .records import DatasetRegistry, RawRecord


@dataclass(frozen=True)
class DatasetStats:
    name: str
    samples: int
    avg_question_len: float
    avg_passage_len: float


def _word_len(text: str) -> int:
    # Whitespace words, the convention the summary-table lengths use.
    return len(text.split())


def dataset_stats(registry: DatasetRegistry) -> list[DatasetStats]:
    """One row per dataset: sample count and mean word-level Q/P lengths.

    Empty datasets are excluded with a warning.
    """
    rows = []
    named: list[tuple[str, list[RawRecord]]] = [
        *registry.in_domain.items(), *registry.out_of_domain.items()]
    for name, records in named:
        if not records:
            warnings.warn(f"dataset {name!r} is empty; excluded from stats")
            continue
        rows.append(DatasetStats(
            name=name,
            samples=len(records),
            avg_question_len=sum(_word_len(r.question) for r in records) / len(records),
            avg_passage_len=sum(_word_len(r.context) for r in records) / len(records),
        ))
    return rows


def stats_table(rows: list[DatasetStats]) -> str:
    lines = ["| Dataset | Samples | Avg Q len | Avg P len |",
             "|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.name} | {r.samples} | {r.avg_question_len:.1f} "
                     f"| {r.avg_passage_len:.1f} |")
    return "\n".join(lines)
