"""Finite-difference validation of the model losses on a toy configuration.

Shared by the test suite and the CLI gradcheck command. The toy model is
deliberately small (vocab 50, d_model 16, one layer) and drawn at init
scales large enough that every parameter's true gradient sits well above
finite-difference rounding noise.
"""

from __future__ import annotations

import numpy as np

from .dataio.records import QAExample
from .diffcore import grad_check
from .model.config import EncoderConfig
from .model.discriminator import init_disc_params
from .model.encoder import encode_batch, init_qa_params, pack_batch
from .model.losses import adv_loss, combined_qa_objective, disc_loss, qa_loss

TOY_CONFIG = EncoderConfig(vocab_size=50, d_model=16, n_layers=1, n_heads=2,
                           max_question_len=8, max_passage_len=16)
GRADCHECK_TOLERANCE = 1e-4


def toy_batch(rng: np.random.Generator, size: int = 4,
              n_domains: int = 3) -> list[QAExample]:
    """Uniform-length examples so the packed batch carries no PAD positions."""
    examples = []
    for i in range(size):
        start = int(rng.integers(0, 9))
        examples.append(QAExample(
            question_ids=tuple(rng.integers(4, TOY_CONFIG.vocab_size, size=5)),
            passage_ids=tuple(rng.integers(4, TOY_CONFIG.vocab_size, size=11)),
            answer_start=start,
            answer_end=start + int(rng.integers(0, 3)),
            domain_label=int(rng.integers(n_domains)),
            qid=f"toy-{i}",
            chunk_offset=0,
        ))
    return examples


def _relu_kink_margin(packed, theta, phi) -> float:
    """Distance of the discriminator's hidden pre-activations from zero.

    Central differences straddling a ReLU kink measure the average of two
    slopes, not the subgradient, so the check point must keep every
    pre-activation away from zero by a multiple of eps.
    """
    pooled = encode_batch(packed, theta, TOY_CONFIG).pooled_h.data
    pre = pooled @ phi["w1"].data + phi["b1"].data
    return float(np.abs(pre).min())


def run_loss_gradchecks(seed: int = 0, eps: float = 1e-5,
                        adv_weight: float = 1e-2) -> dict[str, float]:
    """Max relative error of analytic vs central-difference gradients per loss.

    qa_loss and the combined objective are checked against theta (the set a
    QA update touches), disc_loss against phi (its detached input makes
    theta's gradient zero by design), and adv_loss against both parameter
    sets, where nothing is scaled down by the adversarial weight.
    """
    rng = np.random.default_rng(seed)
    # Init scales chosen so every gradient sits above finite-difference
    # noise without saturating any softmax into vanishing-probability
    # classes whose gradients would fall under the relative-error floor.
    theta = init_qa_params(TOY_CONFIG, rng, init_scale=0.2)
    phi = init_disc_params(TOY_CONFIG.d_model, 3, rng, init_scale=0.5)
    for _ in range(20):
        examples = toy_batch(rng)
        packed = pack_batch(examples, TOY_CONFIG)
        if _relu_kink_margin(packed, theta, phi) > 100.0 * eps:
            break
    else:
        raise RuntimeError("could not find a kink-free evaluation point")

    def forward():
        return encode_batch(packed, theta, TOY_CONFIG)

    def f_qa():
        return qa_loss(forward(), packed.gold_start, packed.gold_end)

    def f_disc():
        return disc_loss(forward().pooled_h, packed.domain_labels, phi)

    def f_adv():
        return adv_loss(forward().pooled_h, phi)

    def f_combined():
        return combined_qa_objective(forward(), packed.gold_start,
                                     packed.gold_end, phi, adv_weight)

    theta_params = list(theta.values())
    both = theta_params + list(phi.values())
    return {
        "qa_loss": grad_check(f_qa, theta_params, eps=eps),
        "disc_loss": grad_check(f_disc, list(phi.values()), eps=eps),
        "adv_loss": grad_check(f_adv, both, eps=eps),
        "combined_objective": grad_check(f_combined, theta_params, eps=eps),
    }
