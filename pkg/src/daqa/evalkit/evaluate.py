"""End-to-end scoring of a model over named datasets."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..dataio.examples import build_eval_examples
from ..dataio.records import EvalExample, RawRecord
from ..dataio.vocab import Vocabulary
from ..diffcore import Tensor
from ..model.config import EncoderConfig
from ..model.decoding import decode_span
from ..model.encoder import encode_batch, pack_batch
from .report import DatasetScore, EvalReport
from .squad_metrics import exact_match, f1_score


class EvalError(Exception):
    pass


def predict_dataset(records: Sequence[RawRecord], theta: dict[str, Tensor],
                    config: EncoderConfig, vocab: Vocabulary,
                    max_answer_len: int = 30,
                    batch_size: int = 64) -> dict[str, str]:
    """Best answer text per qid, taking the highest-scoring chunk per record."""
    examples = build_eval_examples(records, vocab,
                                   max_question_len=config.max_question_len,
                                   max_passage_len=config.max_passage_len)
    best: dict[str, tuple[float, str]] = {}
    for lo in range(0, len(examples), batch_size):
        group: list[EvalExample] = examples[lo:lo + batch_size]
        packed = pack_batch(group, config, with_golds=False)
        out = encode_batch(packed, theta, config, train=False)
        start = out.start_logits.data
        end = out.end_logits.data
        for b, ex in enumerate(group):
            s, e, score = decode_span(start[b], end[b], out.span_mask[b],
                                      max_answer_len)
            p0 = int(packed.passage_start[b])
            text = " ".join(ex.passage_tokens[s - p0:e - p0 + 1])
            if ex.qid not in best or score > best[ex.qid][0]:
                best[ex.qid] = (score, text)
    return {qid: text for qid, (score, text) in best.items()}


def score_predictions(records: Sequence[RawRecord],
                      predictions: dict[str, str]) -> tuple[float, float, int]:
    """Dataset-level (EM percent, F1 percent, n), max over golds per record."""
    em_total = 0.0
    f1_total = 0.0
    n = 0
    for rec in records:
        pred = predictions.get(rec.qid, "")
        em_total += exact_match(pred, rec.answers)
        f1_total += f1_score(pred, rec.answers)
        n += 1
    if n == 0:
        raise EvalError("cannot score an empty dataset")
    return 100.0 * em_total / n, 100.0 * f1_total / n, n


def evaluate(theta: dict[str, Tensor], config: EncoderConfig, vocab: Vocabulary,
             datasets: dict[str, Sequence[RawRecord]], max_answer_len: int = 30,
             batch_size: int = 64,
             expected_vocab_hash: str | None = None) -> EvalReport:
    """EM/F1 per dataset plus macro averages; deterministic given its inputs."""
    if expected_vocab_hash is not None and vocab.content_hash() != expected_vocab_hash:
        raise EvalError("vocabulary hash mismatch between model and examples")
    rows = []
    all_predictions: dict[str, dict[str, str]] = {}
    for name, records in datasets.items():
        predictions = predict_dataset(records, theta, config, vocab,
                                      max_answer_len, batch_size)
        em, f1, n = score_predictions(records, predictions)
        rows.append(DatasetScore(name=name, em=em, f1=f1, n=n))
        all_predictions[name] = predictions
    if not rows:
        raise EvalError("no datasets to evaluate")
    return EvalReport(rows=rows, predictions=all_predictions)


def pooled_representations(records: Sequence[RawRecord], theta: dict[str, Tensor],
                           config: EncoderConfig, vocab: Vocabulary,
                           batch_size: int = 64) -> np.ndarray:
    """Frozen pooled h for the first chunk of each record, in input order."""
    examples = build_eval_examples(records, vocab,
                                   max_question_len=config.max_question_len,
                                   max_passage_len=config.max_passage_len)
    first_chunks = [ex for ex in examples if ex.chunk_offset == 0]
    rows = []
    for lo in range(0, len(first_chunks), batch_size):
        packed = pack_batch(first_chunks[lo:lo + batch_size], config, with_golds=False)
        out = encode_batch(packed, theta, config, train=False)
        rows.append(out.pooled_h.data)
    return np.concatenate(rows, axis=0)
