"""Line-delimited MRQA-format ingestion and emission."""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .records import DataError, RawRecord

GZIP_MAGIC = b"\x1f\x8b"


class ParseError(DataError):
    """Malformed input file; carries the offending line number."""


@dataclass
class ParseResult:
    """Parsed records plus counters for everything dropped or skipped."""

    records: list[RawRecord] = field(default_factory=list)
    dropped_no_answer: int = 0
    skipped_malformed: int = 0

    def __iter__(self):
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _open_lines(path: Path):
    with open(path, "rb") as probe:
        magic = probe.read(2)
    if magic == GZIP_MAGIC:
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, "rt", encoding="utf-8")


def parse_mrqa_jsonl(path: str | Path, dataset_name: str) -> ParseResult:
    """Read one MRQA-style JSONL file (optionally gzipped).

    The first line may be a header object and is skipped. Each data line is
    {"context": str, "qas": [{"qid", "question", "answers": [str], ...}]},
    producing one record per (context, qa) pair. Records with an empty
    answer list are dropped and counted; qa entries missing context or
    question are skipped and counted. Unknown fields are ignored.
    """
    path = Path(path)
    result = ParseResult()
    with _open_lines(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
            if lineno == 1 and "header" in payload:
                continue
            context = payload.get("context")
            for i, qa in enumerate(payload.get("qas", [])):
                question = qa.get("question")
                if not isinstance(context, str) or not isinstance(question, str):
                    result.skipped_malformed += 1
                    continue
                answers = [a for a in qa.get("answers", []) if isinstance(a, str) and a]
                if not answers:
                    result.dropped_no_answer += 1
                    continue
                qid = qa.get("qid") or f"{path.stem}-L{lineno}-{i}"
                result.records.append(RawRecord(
                    context=context, question=question, answers=tuple(answers),
                    qid=str(qid), dataset_name=dataset_name))
    return result


def write_mrqa_jsonl(records: Iterable[RawRecord], path: str | Path,
                     dataset_name: str, gzipped: bool = False) -> None:
    """Emit records in the same shape `parse_mrqa_jsonl` reads."""
    path = Path(path)
    opener = gzip.open if gzipped else open
    with opener(path, "wt", encoding="utf-8") as handle:
        handle.write(json.dumps({"header": {"dataset": dataset_name}}) + "\n")
        for rec in records:
            line = {
                "context": rec.context,
                "qas": [{"qid": rec.qid, "question": rec.question,
                         "answers": list(rec.answers)}],
            }
            handle.write(json.dumps(line) + "\n")
