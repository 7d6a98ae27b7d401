"""Dataset ingestion, tokenization, chunking, and synthetic corpora."""

from .chunking import chunk_passage
from .examples import (
    DEFAULT_MAX_PASSAGE_LEN,
    DEFAULT_MAX_QUESTION_LEN,
    DEFAULT_STRIDE,
    BuildResult,
    build_eval_examples,
    build_examples,
)
from .mrqa import ParseError, ParseResult, parse_mrqa_jsonl, write_mrqa_jsonl
from .records import (
    Chunk,
    DataError,
    DatasetRegistry,
    EvalExample,
    QAExample,
    RawRecord,
)
from .spans import Sentence, find_answer_spans, select_gold_span, split_sentences
from .stats import DatasetStats, dataset_stats, stats_table
from .synth import SHIFT_PROFILES, synth_generate
from .vocab import CLS, PAD, SEP, UNK, Vocabulary, text_tokens

__all__ = [
    "CLS",
    "PAD",
    "SEP",
    "UNK",
    "DEFAULT_MAX_PASSAGE_LEN",
    "DEFAULT_MAX_QUESTION_LEN",
    "DEFAULT_STRIDE",
    "SHIFT_PROFILES",
    "BuildResult",
    "Chunk",
    "DataError",
    "DatasetRegistry",
    "DatasetStats",
    "EvalExample",
    "ParseError",
    "ParseResult",
    "QAExample",
    "RawRecord",
    "Sentence",
    "Vocabulary",
    "build_eval_examples",
    "build_examples",
    "chunk_passage",
    "dataset_stats",
    "find_answer_spans",
    "parse_mrqa_jsonl",
    "select_gold_span",
    "split_sentences",
    "stats_table",
    "synth_generate",
    "text_tokens",
    "write_mrqa_jsonl",
]
