"""QA encoder, domain discriminator, losses, and span decoding."""

from .config import EncoderConfig, ModelError
from .decoding import DecodeError, decode_span
from .discriminator import disc_forward, init_disc_params, num_domains
from .encoder import (
    NEG_INF,
    ForwardOutput,
    PackedBatch,
    SequenceOverflowError,
    SingleEncoding,
    encode,
    encode_batch,
    init_qa_params,
    pack_batch,
)
from .losses import adv_loss, combined_qa_objective, disc_loss, qa_loss

__all__ = [
    "NEG_INF",
    "DecodeError",
    "EncoderConfig",
    "ForwardOutput",
    "ModelError",
    "PackedBatch",
    "SequenceOverflowError",
    "SingleEncoding",
    "adv_loss",
    "combined_qa_objective",
    "decode_span",
    "disc_forward",
    "disc_loss",
    "encode",
    "encode_batch",
    "init_disc_params",
    "init_qa_params",
    "num_domains",
    "pack_batch",
    "qa_loss",
]
