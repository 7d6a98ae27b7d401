"""The three training losses: span NLL, discriminator CE, KL-to-uniform."""

from __future__ import annotations

import numpy as np

from ..diffcore import Tensor, add, cross_entropy, kl_uniform, mean_, mul, softmax
from .config import ModelError
from .discriminator import disc_forward, num_domains
from .encoder import ForwardOutput


def qa_loss(outputs: ForwardOutput, gold_starts: np.ndarray,
            gold_ends: np.ndarray) -> Tensor:
    """Mean over the batch of per-example start CE plus end CE.

    Each example contributes the sum of its two terms and is counted once
    in the normalizer.
    """
    gold_starts = np.asarray(gold_starts)
    gold_ends = np.asarray(gold_ends)
    rows = np.arange(len(gold_starts))
    if not outputs.span_mask[rows, gold_starts].all():
        raise ModelError("a gold start position is masked out of the passage region")
    if not outputs.span_mask[rows, gold_ends].all():
        raise ModelError("a gold end position is masked out of the passage region")
    per_example = add(cross_entropy(outputs.start_logits, gold_starts),
                      cross_entropy(outputs.end_logits, gold_ends))
    return mean_(per_example)


def disc_loss(pooled_h: Tensor, domain_labels: np.ndarray,
              disc_params: dict[str, Tensor]) -> Tensor:
    """Mean CE of the discriminator on detached h: only phi receives gradient."""
    labels = np.asarray(domain_labels)
    k = num_domains(disc_params)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise IndexError(f"domain label out of range for K={k}")
    logits = disc_forward(pooled_h.detach(), disc_params)
    return mean_(cross_entropy(logits, labels))


def adv_loss(pooled_h: Tensor, disc_params: dict[str, Tensor]) -> Tensor:
    """Mean KL(uniform || P_phi(. | h)); gradient flows through phi into the encoder."""
    probs = softmax(disc_forward(pooled_h, disc_params))
    return mean_(kl_uniform(probs))


def combined_qa_objective(outputs: ForwardOutput, gold_starts: np.ndarray,
                          gold_ends: np.ndarray, disc_params: dict[str, Tensor],
                          adv_weight: float) -> Tensor:
    """qa_loss + adv_weight * adv_loss; weight 0 short-circuits to qa_loss alone."""
    if adv_weight < 0:
        raise ModelError("adv_weight must be >= 0")
    qa = qa_loss(outputs, gold_starts, gold_ends)
    if adv_weight == 0.0:
        return qa
    return add(qa, mul(adv_loss(outputs.pooled_h, disc_params), adv_weight))
