"""Pre-LN transformer encoder with span heads and a pooled CLS representation.

Input packing mirrors the [CLS] question [SEP] passage [SEP] convention.
Span logits are masked to the passage region before any softmax: answers
live in the passage, so PAD, separators, and question positions get a large
negative additive mask.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataio.records import QAExample
from ..dataio.vocab import CLS, PAD, SEP
from ..diffcore import (
    Tensor,
    add,
    attention,
    dropout,
    gather_rows,
    layer_norm,
    matmul,
    relu,
    reshape,
    select_index,
    transpose,
)
from .config import EncoderConfig, ModelError

NEG_INF = -1e30


class SequenceOverflowError(ModelError):
    """Input longer than the configured window; the caller must chunk."""


def init_qa_params(config: EncoderConfig, rng: np.random.Generator,
                   init_scale: float = 0.02,
                   dtype=np.float64) -> dict[str, Tensor]:
    """Encoder parameters (token/position/segment embeddings, layers, span heads)."""

    def w(*shape):
        return Tensor(rng.normal(0.0, init_scale, size=shape).astype(dtype),
                      requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)

    d, f = config.d_model, config.d_ffn
    params: dict[str, Tensor] = {
        "tok_emb": w(config.vocab_size, d),
        "pos_emb": w(config.max_seq_len, d),
        "seg_emb": w(2, d),
    }
    for i in range(config.n_layers):
        params.update({
            f"l{i}.ln1.g": ones(d), f"l{i}.ln1.b": zeros(d),
            f"l{i}.wq": w(d, d), f"l{i}.bq": zeros(d),
            # No key bias: it cancels exactly inside the attention softmax.
            f"l{i}.wk": w(d, d),
            f"l{i}.wv": w(d, d), f"l{i}.bv": zeros(d),
            f"l{i}.wo": w(d, d), f"l{i}.bo": zeros(d),
            f"l{i}.ln2.g": ones(d), f"l{i}.ln2.b": zeros(d),
            f"l{i}.w1": w(d, f), f"l{i}.b1": zeros(f),
            f"l{i}.w2": w(f, d), f"l{i}.b2": zeros(d),
        })
    params.update({
        # Gain-only final norm: a bias here would shift every span logit
        # uniformly and drop out of the span softmax.
        "ln_f.g": ones(d),
        "start_vec": w(d), "end_vec": w(d),
    })
    return params


@dataclass
class PackedBatch:
    """Numpy-side batch layout fed to the encoder."""

    token_ids: np.ndarray        # (B, T) int
    segment_ids: np.ndarray      # (B, T) int: 0 = CLS+question+SEP, 1 = passage+SEP
    position_ids: np.ndarray     # (B, T) int
    attn_additive: np.ndarray    # (B, 1, 1, T): 0 attendable, NEG_INF at PAD
    span_additive: np.ndarray    # (B, T): 0 at passage tokens, NEG_INF elsewhere
    passage_start: np.ndarray    # (B,) packed index of the first passage token
    passage_len: np.ndarray      # (B,)
    gold_start: np.ndarray | None   # (B,) packed positions
    gold_end: np.ndarray | None
    domain_labels: np.ndarray | None
    qids: list[str]
    chunk_offsets: list[int]

    @property
    def size(self) -> int:
        return self.token_ids.shape[0]

    @property
    def span_mask(self) -> np.ndarray:
        return self.span_additive == 0.0


def pack_batch(examples: Sequence, config: EncoderConfig,
               with_golds: bool = True) -> PackedBatch:
    """Pad [CLS] q [SEP] p [SEP] rows to the longest sequence in the batch."""
    rows = []
    for ex in examples:
        if len(ex.question_ids) > config.max_question_len:
            raise SequenceOverflowError(
                f"{ex.qid}: question of {len(ex.question_ids)} tokens exceeds "
                f"{config.max_question_len}")
        if len(ex.passage_ids) > config.max_passage_len:
            raise SequenceOverflowError(
                f"{ex.qid}: passage chunk of {len(ex.passage_ids)} tokens exceeds "
                f"{config.max_passage_len}")
        rows.append([CLS, *ex.question_ids, SEP, *ex.passage_ids, SEP])

    batch = len(rows)
    t_max = max(len(r) for r in rows)
    token_ids = np.full((batch, t_max), PAD, dtype=np.int64)
    segment_ids = np.zeros((batch, t_max), dtype=np.int64)
    attn_additive = np.full((batch, t_max), NEG_INF)
    span_additive = np.full((batch, t_max), NEG_INF)
    passage_start = np.empty(batch, dtype=np.int64)
    passage_len = np.empty(batch, dtype=np.int64)

    for b, (ex, row) in enumerate(zip(examples, rows)):
        n = len(row)
        token_ids[b, :n] = row
        p_start = 1 + len(ex.question_ids) + 1
        p_len = len(ex.passage_ids)
        segment_ids[b, p_start:n] = 1
        attn_additive[b, :n] = 0.0
        span_additive[b, p_start:p_start + p_len] = 0.0
        passage_start[b] = p_start
        passage_len[b] = p_len

    gold_start = gold_end = domain_labels = None
    if with_golds:
        gold_start = passage_start + np.array([ex.answer_start for ex in examples])
        gold_end = passage_start + np.array([ex.answer_end for ex in examples])
        domain_labels = np.array([ex.domain_label for ex in examples], dtype=np.int64)

    return PackedBatch(
        token_ids=token_ids,
        segment_ids=segment_ids,
        position_ids=np.broadcast_to(np.arange(t_max, dtype=np.int64), (batch, t_max)),
        attn_additive=attn_additive[:, None, None, :],
        span_additive=span_additive,
        passage_start=passage_start,
        passage_len=passage_len,
        gold_start=gold_start,
        gold_end=gold_end,
        domain_labels=domain_labels,
        qids=[ex.qid for ex in examples],
        chunk_offsets=[ex.chunk_offset for ex in examples],
    )


@dataclass
class ForwardOutput:
    """Batched encoder outputs; span logits already carry the passage mask."""

    start_logits: Tensor       # (B, T)
    end_logits: Tensor         # (B, T)
    pooled_h: Tensor           # (B, d_model)
    span_mask: np.ndarray      # (B, T) bool, True where a span may start/end


def encode_batch(packed: PackedBatch, params: dict[str, Tensor],
                 config: EncoderConfig, train: bool = False,
                 rng: np.random.Generator | None = None,
                 ffn_preact_sink: list | None = None) -> ForwardOutput:
    b, t = packed.token_ids.shape
    if t > config.max_seq_len:
        raise SequenceOverflowError(f"packed length {t} exceeds {config.max_seq_len}")
    d, heads, d_head = config.d_model, config.n_heads, config.d_head
    dtype = params["tok_emb"].dtype
    rate = config.dropout_rate if train else 0.0
    if rate > 0.0 and rng is None:
        raise ModelError("dropout in train mode needs an rng")

    def drop(x: Tensor) -> Tensor:
        return dropout(x, rate, rng) if rate > 0.0 else x

    x = add(add(gather_rows(params["tok_emb"], packed.token_ids),
                gather_rows(params["pos_emb"], packed.position_ids)),
            gather_rows(params["seg_emb"], packed.segment_ids))
    x = drop(x)

    attn_mask = Tensor(packed.attn_additive.astype(dtype, copy=False))
    for i in range(config.n_layers):
        p = lambda key: params[f"l{i}.{key}"]  # noqa: E731

        h = layer_norm(x, p("ln1.g"), p("ln1.b"))
        flat = reshape(h, (b * t, d))

        def project(w_key, b_key=None):
            proj = matmul(flat, p(w_key))
            if b_key is not None:
                proj = add(proj, p(b_key))
            return transpose(reshape(proj, (b, t, heads, d_head)), (0, 2, 1, 3))

        ctx = attention(project("wq", "bq"), project("wk"),
                        project("wv", "bv"), attn_mask)
        ctx = reshape(transpose(ctx, (0, 2, 1, 3)), (b * t, d))
        ctx = add(matmul(ctx, p("wo")), p("bo"))
        x = add(x, drop(reshape(ctx, (b, t, d))))

        h = layer_norm(x, p("ln2.g"), p("ln2.b"))
        pre = add(matmul(reshape(h, (b * t, d)), p("w1")), p("b1"))
        if ffn_preact_sink is not None:
            ffn_preact_sink.append(pre.data)
        ffn = add(matmul(relu(pre), p("w2")), p("b2"))
        x = add(x, drop(reshape(ffn, (b, t, d))))

    x = layer_norm(x, params["ln_f.g"])
    flat = reshape(x, (b * t, d))
    span_mask_t = Tensor(packed.span_additive.astype(dtype, copy=False))
    start_logits = add(reshape(matmul(flat, reshape(params["start_vec"], (d, 1))), (b, t)),
                       span_mask_t)
    end_logits = add(reshape(matmul(flat, reshape(params["end_vec"], (d, 1))), (b, t)),
                     span_mask_t)
    return ForwardOutput(
        start_logits=start_logits,
        end_logits=end_logits,
        pooled_h=select_index(x, 1, 0),
        span_mask=packed.span_mask,
    )


@dataclass
class SingleEncoding:
    """Inference-mode encoding of one (question, passage) pair."""

    start_logits: np.ndarray   # (T,)
    end_logits: np.ndarray     # (T,)
    pooled_h: np.ndarray       # (d_model,)
    span_mask: np.ndarray      # (T,) bool
    passage_start: int


def encode(question_ids: Sequence[int], passage_ids: Sequence[int],
           params: dict[str, Tensor], config: EncoderConfig) -> SingleEncoding:
    """Deterministic single-example forward pass (dropout off)."""
    stub = QAExample(question_ids=tuple(question_ids), passage_ids=tuple(passage_ids),
                     answer_start=0, answer_end=0, domain_label=0,
                     qid="single", chunk_offset=0)
    packed = pack_batch([stub], config, with_golds=False)
    out = encode_batch(packed, params, config, train=False)
    return SingleEncoding(
        start_logits=out.start_logits.data[0],
        end_logits=out.end_logits.data[0],
        pooled_h=out.pooled_h.data[0],
        span_mask=out.span_mask[0],
        passage_start=int(packed.passage_start[0]),
    )
