"""Encoder architecture configuration."""

from __future__ import annotations

from dataclasses import asdict, dataclass


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    max_question_len: int = 64
    max_passage_len: int = 384
    dropout_rate: float = 0.0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ModelError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_seq_len < 3:
            raise ModelError("max_seq_len must be >= 3")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ModelError("dropout_rate must be in [0, 1)")

    @property
    def max_seq_len(self) -> int:
        # [CLS] question [SEP] passage [SEP]
        return 1 + self.max_question_len + 1 + self.max_passage_len + 1

    @property
    def d_ffn(self) -> int:
        return 4 * self.d_model

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "EncoderConfig":
        return cls(**payload)
