"""Turning raw records into trainable and decodable examples."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .chunking import chunk_passage
from .records import EvalExample, QAExample, RawRecord
from .spans import find_answer_spans, select_gold_span, split_sentences
from .vocab import Vocabulary, text_tokens

DEFAULT_MAX_QUESTION_LEN = 64
DEFAULT_MAX_PASSAGE_LEN = 384
DEFAULT_STRIDE = 128


@dataclass
class BuildResult:
    """Training examples plus counters for records dropped along the way."""

    examples: list[QAExample] = field(default_factory=list)
    dropped_no_span: int = 0
    dropped_span_split: int = 0

    def __iter__(self):
        return iter(self.examples)

    def __len__(self):
        return len(self.examples)


def build_examples(records: Iterable[RawRecord], vocab: Vocabulary,
                   domain_label: int, gold_mode: str = "first",
                   max_question_len: int = DEFAULT_MAX_QUESTION_LEN,
                   max_passage_len: int = DEFAULT_MAX_PASSAGE_LEN,
                   stride: int = DEFAULT_STRIDE) -> BuildResult:
    """One QAExample per (record, chunk) whose window holds the full gold span.

    The gold span comes from the first listed answer text; records whose
    answer has no token match, or whose gold span survives in no chunk, are
    dropped and counted. Questions are truncated to `max_question_len`.
    """
    result = BuildResult()
    for rec in records:
        question_tokens = text_tokens(rec.question)[:max_question_len]
        question_ids = tuple(vocab.encode_tokens(question_tokens))
        passage_tokens = text_tokens(rec.context)
        passage_ids = vocab.encode_tokens(passage_tokens)
        answer_ids = vocab.encode(rec.answers[0])
        if not answer_ids:
            result.dropped_no_span += 1
            continue
        spans = find_answer_spans(passage_ids, answer_ids)
        if not spans:
            result.dropped_no_span += 1
            continue
        gold = select_gold_span(spans, gold_mode, question_tokens,
                                split_sentences(passage_tokens))
        kept_any = False
        for chunk in chunk_passage(passage_ids, max_passage_len, stride):
            if not chunk.contains(gold[0], gold[1]):
                continue
            kept_any = True
            result.examples.append(QAExample(
                question_ids=question_ids,
                passage_ids=chunk.ids,
                answer_start=gold[0] - chunk.offset,
                answer_end=gold[1] - chunk.offset,
                domain_label=domain_label,
                qid=rec.qid,
                chunk_offset=chunk.offset,
            ))
        if not kept_any:
            result.dropped_span_split += 1
    return result


def build_eval_examples(records: Iterable[RawRecord], vocab: Vocabulary,
                        max_question_len: int = DEFAULT_MAX_QUESTION_LEN,
                        max_passage_len: int = DEFAULT_MAX_PASSAGE_LEN,
                        stride: int = DEFAULT_STRIDE) -> list[EvalExample]:
    """Every chunk of every record, for inference-time decoding.

    Chunks keep their surface tokens so predictions render from the original
    text rather than from (possibly UNK-mapped) vocabulary ids.
    """
    out = []
    for rec in records:
        question_tokens = text_tokens(rec.question)[:max_question_len]
        question_ids = tuple(vocab.encode_tokens(question_tokens))
        passage_tokens = text_tokens(rec.context)
        passage_ids = vocab.encode_tokens(passage_tokens)
        for chunk in chunk_passage(passage_ids, max_passage_len, stride):
            out.append(EvalExample(
                question_ids=question_ids,
                passage_ids=chunk.ids,
                passage_tokens=tuple(
                    passage_tokens[chunk.offset:chunk.offset + len(chunk.ids)]),
                qid=rec.qid,
                chunk_offset=chunk.offset,
                golds=rec.answers,
            ))
    return out
