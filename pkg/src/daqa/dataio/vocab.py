"""Lowercase word-level vocabulary with punctuation splitting.

Stands in for subword tokenization at desk scale; span metrics and the
adversarial mechanism do not depend on the tokenizer granularity.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from pathlib import Path
from typing import Iterable

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

PAD, UNK, CLS, SEP = 0, 1, 2, 3
RESERVED = ("[PAD]", "[UNK]", "[CLS]", "[SEP]")


def text_tokens(text: str) -> list[str]:
    """Lowercased tokens split on whitespace and punctuation boundaries."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Bijective token<->id map with stable reserved ids 0..3."""

    def __init__(self, tokens: Iterable[str]):
        self.id_to_token: list[str] = list(RESERVED)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        for tok in tokens:
            if tok in self.token_to_id:
                raise ValueError(f"duplicate token {tok!r}")
            self.token_to_id[tok] = len(self.id_to_token)
            self.id_to_token.append(tok)

    def __len__(self) -> int:
        return len(self.id_to_token)

    @classmethod
    def build(cls, texts: Iterable[str], min_count: int = 1) -> "Vocabulary":
        """Count tokens over `texts`; order by descending count, then token."""
        counts = Counter()
        for text in texts:
            counts.update(text_tokens(text))
        kept = sorted((t for t, c in counts.items() if c >= min_count),
                      key=lambda t: (-counts[t], t))
        return cls(kept)

    def encode(self, text: str) -> list[int]:
        unk = UNK
        table = self.token_to_id
        return [table.get(t, unk) for t in text_tokens(text)]

    def encode_tokens(self, tokens: Iterable[str]) -> list[int]:
        table = self.token_to_id
        return [table.get(t, UNK) for t in tokens]

    def decode(self, ids: Iterable[int]) -> str:
        """Normalized surface form: tokens joined with single spaces."""
        return " ".join(self.id_to_token[i] for i in ids)

    def content_hash(self) -> str:
        blob = "\n".join(self.id_to_token).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"tokens": self.id_to_token[len(RESERVED):]}))

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        payload = json.loads(Path(path).read_text())
        return cls(payload["tokens"])
