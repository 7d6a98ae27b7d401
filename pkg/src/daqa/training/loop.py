"""Alternating adversarial optimization of the QA model and discriminator.

Per mini-batch: `alternation_ratio` discriminator updates on the current
encoder's pooled representations, then one QA update on the same batch
whose objective adds the weighted KL-to-uniform term. Baseline mode runs
the same loop with the adversarial path disabled entirely.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from ..dataio.examples import build_examples
from ..dataio.records import DataError, DatasetRegistry, QAExample
from ..dataio.vocab import Vocabulary
from ..diffcore import Tape, Tensor, add, cross_entropy, mean_, mul
from ..evalkit.evaluate import evaluate
from ..model.config import EncoderConfig
from ..model.discriminator import disc_forward, init_disc_params
from ..model.encoder import PackedBatch, encode_batch, init_qa_params, pack_batch
from ..model.losses import adv_loss, qa_loss
from ..sampler import batches_per_epoch, stratified_batches
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import Adam, clip_global_norm

logger = logging.getLogger(__name__)

MODES = ("baseline", "adversarial")


class TrainingDiverged(Exception):
    """A loss went non-finite; carries a diagnostics snapshot."""


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 1e-3   # synthetic default; 3e-5 for full-scale parity
    adv_weight: float = 1e-2
    epochs: int = 2
    alternation_ratio: int = 1
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip_norm: float = 1.0
    max_answer_len: int = 30
    param_dtype: str = "float32"   # loss oracles and grad checks stay 64-bit

    def __post_init__(self):
        if self.adv_weight < 0:
            raise ValueError("adv_weight must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.alternation_ratio < 1:
            raise ValueError("alternation_ratio must be >= 1")
        if self.param_dtype not in ("float32", "float64"):
            raise ValueError("param_dtype must be float32 or float64")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class TrainState:
    theta: dict[str, Tensor]
    phi: dict[str, Tensor]
    opt_theta: Adam
    opt_phi: Adam
    encoder_config: EncoderConfig
    vocab: Vocabulary
    step: int = 0
    epoch: int = 0
    best_val_f1: float = float("-inf")
    best_checkpoint_path: str | None = None
    dropout_rng: np.random.Generator = field(
        default_factory=lambda: np.random.default_rng(0))


@dataclass
class TrainResult:
    state: TrainState
    metrics_path: Path
    best_checkpoint_path: Path | None
    last_checkpoint_path: Path
    val_history: list[dict]


def _epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, 977, epoch]).generate_state(1)[0])


def disc_step(packed: PackedBatch, state: TrainState,
              config: TrainConfig) -> tuple[float, float]:
    """One discriminator update on detached pooled h; theta untouched."""
    out = encode_batch(packed, state.theta, state.encoder_config, train=False)
    pooled = Tensor(out.pooled_h.data)
    labels = packed.domain_labels
    with Tape() as tape:
        logits = disc_forward(pooled, state.phi)
        loss = mean_(cross_entropy(logits, labels))
    value = loss.item()
    if not np.isfinite(value):
        raise TrainingDiverged(f"discriminator loss non-finite at step {state.step}")
    tape.backward(loss)
    norm, clipped = clip_global_norm(state.phi, config.grad_clip_norm)
    if clipped:
        logger.info("disc grad norm %.3f clipped at step %d", norm, state.step)
    state.opt_phi.step()
    state.opt_phi.zero_grad()
    accuracy = float((logits.data.argmax(axis=-1) == labels).mean())
    return value, accuracy


def qa_step(packed: PackedBatch, state: TrainState, adv_weight: float,
            config: TrainConfig) -> tuple[float, float]:
    """One QA-model update on qa_loss (+ weighted adversarial term); phi untouched."""
    with Tape() as tape:
        out = encode_batch(packed, state.theta, state.encoder_config,
                           train=True, rng=state.dropout_rng)
        qa = qa_loss(out, packed.gold_start, packed.gold_end)
        if adv_weight > 0.0:
            adv = adv_loss(out.pooled_h, state.phi)
            total = add(qa, mul(adv, adv_weight))
        else:
            adv = None
            total = qa
    qa_value = qa.item()
    adv_value = adv.item() if adv is not None else 0.0
    if not (np.isfinite(qa_value) and np.isfinite(adv_value)):
        raise TrainingDiverged(
            f"qa/adv loss non-finite at step {state.step}: qa={qa_value} adv={adv_value}")
    tape.backward(total)
    norm, clipped = clip_global_norm(state.theta, config.grad_clip_norm)
    if clipped:
        logger.info("qa grad norm %.3f clipped at step %d", norm, state.step)
    state.opt_theta.step()
    state.opt_theta.zero_grad()
    # The adversarial term backpropagates through phi; those gradients are
    # discarded, never applied.
    state.opt_phi.zero_grad()
    return qa_value, adv_value


def _init_state(config: TrainConfig, encoder_config: EncoderConfig,
                vocab: Vocabulary, n_domains: int) -> TrainState:
    dtype = np.dtype(config.param_dtype)
    theta = init_qa_params(encoder_config, np.random.default_rng([config.seed, 11]),
                           dtype=dtype)
    phi = init_disc_params(encoder_config.d_model, n_domains,
                           np.random.default_rng([config.seed, 13]), dtype=dtype)
    return TrainState(
        theta=theta,
        phi=phi,
        opt_theta=Adam(theta, config.learning_rate, config.beta1, config.beta2,
                       config.adam_eps),
        opt_phi=Adam(phi, config.learning_rate, config.beta1, config.beta2,
                     config.adam_eps),
        encoder_config=encoder_config,
        vocab=vocab,
        dropout_rng=np.random.default_rng([config.seed, 17]),
    )


def _save_state(path: Path, state: TrainState, extra_meta: dict | None = None) -> None:
    save_checkpoint(
        path,
        theta=state.theta, phi=state.phi,
        config=state.encoder_config, vocab=state.vocab,
        step=state.step, epoch=state.epoch, best_val_f1=state.best_val_f1,
        rng_state=state.dropout_rng.bit_generator.state,
        opt_theta_arrays=state.opt_theta.state_arrays(),
        opt_phi_arrays=state.opt_phi.state_arrays(),
        extra_meta=extra_meta,
    )


def _restore_state(path: Path, state: TrainState) -> None:
    loaded = load_checkpoint(path, expected_config=state.encoder_config)
    if loaded.meta["vocab_hash"] != state.vocab.content_hash():
        raise DataError("checkpoint vocabulary does not match the training data")
    for name, t in loaded.theta.items():
        state.theta[name].data = t.data
    for name, t in loaded.phi.items():
        state.phi[name].data = t.data
    state.opt_theta.load_state_arrays(loaded.opt_theta_arrays)
    state.opt_phi.load_state_arrays(loaded.opt_phi_arrays)
    state.step = loaded.meta["step"]
    state.epoch = loaded.meta["epoch"]
    state.best_val_f1 = loaded.meta["best_val_f1"]
    if loaded.meta.get("rng_state") is not None:
        state.dropout_rng.bit_generator.state = loaded.meta["rng_state"]


def group_examples_by_domain(registry: DatasetRegistry, vocab: Vocabulary,
                             encoder_config: EncoderConfig,
                             gold_mode: str) -> list[list[QAExample]]:
    grouped = []
    for label, (name, records) in enumerate(registry.in_domain.items()):
        built = build_examples(records, vocab, label, gold_mode,
                               max_question_len=encoder_config.max_question_len,
                               max_passage_len=encoder_config.max_passage_len)
        if not built.examples:
            raise DataError(f"dataset {name} produced no trainable examples")
        grouped.append(built.examples)
    return grouped


def train(registry: DatasetRegistry, config: TrainConfig, out_dir: str | Path,
          mode: str = "adversarial", gold_mode: str = "first",
          encoder_fields: dict | None = None,
          resume_from: str | Path | None = None,
          max_steps: int | None = None,
          on_step: Callable[[TrainState], None] | None = None) -> TrainResult:
    """Full training run: returns the best checkpoint and a step metrics log.

    The metrics log is line-delimited JSON with keys
    {step, epoch, qa_loss, adv_loss, disc_loss, disc_acc}; baseline rows carry
    null discriminator fields. Validation macro-F1 over the registry's
    held-out datasets is computed at each epoch end and the best checkpoint kept.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not registry.out_of_domain:
        raise DataError("validation set empty: registry has no held-out datasets")
    if mode == "adversarial":
        registry.require_adversarial_ready()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    texts = [r.context for recs in registry.in_domain.values() for r in recs]
    texts += [r.question for recs in registry.in_domain.values() for r in recs]
    vocab = Vocabulary.build(texts)
    encoder_config = EncoderConfig(vocab_size=len(vocab), **(encoder_fields or {}))
    grouped = group_examples_by_domain(registry, vocab, encoder_config, gold_mode)

    state = _init_state(config, encoder_config, vocab, registry.num_domains)
    resuming = resume_from is not None
    if resuming:
        _restore_state(Path(resume_from), state)

    adv_weight = 0.0 if mode == "baseline" else config.adv_weight
    bpe = batches_per_epoch([len(g) for g in grouped], config.batch_size)
    metrics_path = out_dir / "metrics.jsonl"
    best_path = out_dir / "best_checkpoint.npz"
    last_path = out_dir / "last_checkpoint.npz"
    val_history: list[dict] = []
    recent_rows: list[dict] = []

    def run_validation() -> float:
        report = evaluate(state.theta, encoder_config, vocab,
                          registry.out_of_domain,
                          max_answer_len=config.max_answer_len,
                          batch_size=config.batch_size)
        return report.macro_f1

    stopped_early = False
    with open(metrics_path, "a" if resuming else "w", encoding="utf-8") as metrics:
        try:
            for epoch in range(state.epoch, config.epochs):
                done_in_epoch = state.step - epoch * bpe
                batch_stream = stratified_batches(grouped, config.batch_size,
                                                  _epoch_seed(config.seed, epoch))
                for b_idx, batch in enumerate(batch_stream):
                    if b_idx < done_in_epoch:
                        continue
                    packed = pack_batch(batch, encoder_config)
                    disc_value = disc_acc = None
                    if mode == "adversarial":
                        for _ in range(config.alternation_ratio):
                            disc_value, disc_acc = disc_step(packed, state, config)
                    qa_value, adv_value = qa_step(packed, state, adv_weight, config)
                    state.step += 1
                    row = {"step": state.step, "epoch": epoch,
                           "qa_loss": qa_value, "adv_loss": adv_value,
                           "disc_loss": disc_value, "disc_acc": disc_acc}
                    metrics.write(json.dumps(row) + "\n")
                    recent_rows.append(row)
                    del recent_rows[:-5]
                    if on_step is not None:
                        on_step(state)
                    if max_steps is not None and state.step >= max_steps:
                        stopped_early = True
                        break
                if stopped_early:
                    break
                state.epoch = epoch + 1
                val_f1 = run_validation()
                val_history.append({"epoch": epoch, "val_macro_f1": val_f1})
                if val_f1 > state.best_val_f1:
                    state.best_val_f1 = val_f1
                    _save_state(best_path, state)
                    state.best_checkpoint_path = str(best_path)
        except TrainingDiverged:
            (out_dir / "diagnostics.json").write_text(
                json.dumps({"recent_steps": recent_rows}, indent=2))
            raise

    _save_state(last_path, state)
    return TrainResult(
        state=state,
        metrics_path=metrics_path,
        best_checkpoint_path=Path(state.best_checkpoint_path)
        if state.best_checkpoint_path else None,
        last_checkpoint_path=last_path,
        val_history=val_history,
    )
