"""Operator entry point: synth, train, eval, gradcheck, probe, report.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Every
artifact lands under the run's output directory together with a manifest of
paths and content hashes; the fully resolved config is echoed beside the
outputs so a run can be reproduced from it.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import fields as dataclass_fields
from decimal import Decimal
from pathlib import Path

import click
import numpy as np

from .dataio.mrqa import parse_mrqa_jsonl, write_mrqa_jsonl
from .dataio.records import DatasetRegistry
from .dataio.synth import SHIFT_PROFILES, synth_generate
from .evalkit.evaluate import evaluate, pooled_representations
from .evalkit.probe import domain_probe
from .evalkit.report import comparison_from_report_dicts, render_comparison
from .model.config import EncoderConfig
from .training.checkpoint import load_checkpoint
from .training.loop import TrainConfig, train
from .validation import GRADCHECK_TOLERANCE, run_loss_gradchecks

SEED_ENV_VAR = "DAQA_SEED"

ENCODER_KEYS = tuple(f.name for f in dataclass_fields(EncoderConfig)
                     if f.name != "vocab_size")
TRAIN_KEYS = tuple(f.name for f in dataclass_fields(TrainConfig))
RUN_KEYS = ("mode", "gold_mode", "train_data", "val_data", "out_dir")


def _fail_usage(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _fail_runtime(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_manifest(out_dir: Path, paths: list[Path]) -> Path:
    entries = []
    for p in sorted(paths):
        digest = hashlib.sha256(p.read_bytes()).hexdigest()
        entries.append({"path": p.name, "sha256": digest})
    manifest = out_dir / "manifest.json"
    _atomic_write_text(manifest, json.dumps({"artifacts": entries}, indent=2) + "\n")
    return manifest


def _load_run_config(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _fail_usage(f"cannot read config {path}: {exc}")
    allowed = set(ENCODER_KEYS) | set(TRAIN_KEYS) | set(RUN_KEYS)
    unknown = set(payload) - allowed
    if unknown:
        _fail_usage(f"unknown config keys: {sorted(unknown)}")
    for key in ("train_data", "val_data", "out_dir"):
        if key not in payload:
            _fail_usage(f"config missing required key {key!r}")
    resolved = {
        "mode": payload.get("mode", "adversarial"),
        "gold_mode": payload.get("gold_mode", "first"),
        "train_data": payload["train_data"],
        "val_data": payload["val_data"],
        "out_dir": payload["out_dir"],
    }
    if resolved["mode"] not in ("baseline", "adversarial"):
        _fail_usage(f"mode must be baseline or adversarial, got {resolved['mode']!r}")
    if resolved["gold_mode"] not in ("first", "refine"):
        _fail_usage(f"gold_mode must be first or refine, got {resolved['gold_mode']!r}")

    encoder_fields = {k: payload[k] for k in ENCODER_KEYS if k in payload}
    train_fields = {k: payload[k] for k in TRAIN_KEYS if k in payload}
    if resolved["mode"] == "baseline":
        train_fields["adv_weight"] = 0.0
    if SEED_ENV_VAR in os.environ:
        try:
            train_fields["seed"] = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            _fail_usage(f"{SEED_ENV_VAR} must be an integer")
    try:
        train_config = TrainConfig(**train_fields)
        EncoderConfig(vocab_size=4, **encoder_fields)  # validate shape fields
    except (TypeError, ValueError) as exc:
        _fail_usage(f"invalid config: {exc}")
    resolved["encoder"] = encoder_fields
    resolved["train"] = train_config
    return resolved


def _load_registry(train_paths: list[str], val_paths: list[str]) -> DatasetRegistry:
    registry = DatasetRegistry()
    for target, paths in (("in_domain", train_paths), ("out_of_domain", val_paths)):
        for raw in paths:
            p = Path(raw)
            if not p.exists():
                _fail_usage(f"dataset file not found: {p}")
            name = p.name.removesuffix(".gz").removesuffix(".jsonl")
            getattr(registry, target)[name] = parse_mrqa_jsonl(p, name).records
    return registry


def _echo_config(out_dir: Path, resolved: dict) -> Path:
    payload = dict(resolved["encoder"])
    payload.update(resolved["train"].to_dict())
    payload.update({k: resolved[k] for k in RUN_KEYS})
    path = out_dir / "config.json"
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


@click.group()
def main() -> None:
    """Domain-adversarial extractive QA at desk scale."""


@main.command("synth")
@click.option("--domains", "-k", default=3, show_default=True,
              help="Number of in-domain datasets.")
@click.option("--per-domain", "-n", default=2000, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--profile", default="disjoint", show_default=True,
              type=click.Choice(SHIFT_PROFILES))
@click.option("--out", required=True, type=click.Path(path_type=Path))
def cmd_synth(domains: int, per_domain: int, seed: int, profile: str,
              out: Path) -> None:
    """Write a synthetic multi-domain corpus as MRQA-format JSONL files."""
    if domains < 2:
        _fail_usage("adversarial training needs K >= 2")
    if per_domain < 1:
        _fail_usage("--per-domain must be >= 1")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        _fail_usage(f"cannot create output dir {out}: {exc}")
    try:
        registry = synth_generate(domains, per_domain, seed, profile)
        written = []
        for name, records in (*registry.in_domain.items(),
                              *registry.out_of_domain.items()):
            path = out / f"{name}.jsonl"
            tmp = path.with_name(path.name + ".tmp")
            write_mrqa_jsonl(records, tmp, name)
            os.replace(tmp, path)
            written.append(path)
        written.append(_write_manifest(out, written))
        click.echo(f"wrote {len(written)} files to {out}")
    except Exception as exc:
        _fail_runtime(str(exc))


@main.command("train")
@click.option("--config", "config_path", required=True,
              type=click.Path(path_type=Path))
def cmd_train(config_path: Path) -> None:
    """Train a baseline or adversarial model from a JSON run config."""
    resolved = _load_run_config(config_path)
    registry = _load_registry(resolved["train_data"], resolved["val_data"])
    out_dir = Path(resolved["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = train(registry, resolved["train"], out_dir,
                       mode=resolved["mode"], gold_mode=resolved["gold_mode"],
                       encoder_fields=resolved["encoder"])
        ckpt = load_checkpoint(result.best_checkpoint_path
                               or result.last_checkpoint_path)
        report = evaluate(ckpt.theta, ckpt.config, ckpt.vocab,
                          registry.out_of_domain,
                          max_answer_len=resolved["train"].max_answer_len,
                          batch_size=resolved["train"].batch_size)
        report_path = out_dir / "eval_report.json"
        _atomic_write_text(report_path, report.to_json() + "\n")
        _atomic_write_text(out_dir / "eval_report.md", report.to_markdown() + "\n")
        config_echo = _echo_config(out_dir, resolved)
        artifacts = [result.metrics_path, result.last_checkpoint_path,
                     report_path, out_dir / "eval_report.md", config_echo]
        if result.best_checkpoint_path:
            artifacts.append(result.best_checkpoint_path)
        _write_manifest(out_dir, artifacts)
        click.echo(f"val macro-F1 {report.macro_f1:.2f}; artifacts in {out_dir}")
    except Exception as exc:
        _fail_runtime(str(exc))


@main.command("eval")
@click.option("--checkpoint", required=True, type=click.Path(path_type=Path))
@click.option("--data", "data_paths", required=True, multiple=True,
              type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path))
@click.option("--max-answer-len", default=30, show_default=True)
def cmd_eval(checkpoint: Path, data_paths: tuple[Path, ...], out: Path | None,
             max_answer_len: int) -> None:
    """Score a checkpoint on one or more MRQA-format datasets."""
    for p in (checkpoint, *data_paths):
        if not Path(p).exists():
            _fail_usage(f"file not found: {p}")
    try:
        ckpt = load_checkpoint(checkpoint)
        datasets = {}
        for p in data_paths:
            name = p.name.removesuffix(".gz").removesuffix(".jsonl")
            datasets[name] = parse_mrqa_jsonl(p, name).records
        report = evaluate(ckpt.theta, ckpt.config, ckpt.vocab, datasets,
                          max_answer_len=max_answer_len)
        click.echo(report.to_markdown())
        if out:
            out.mkdir(parents=True, exist_ok=True)
            report_json = out / "eval_report.json"
            _atomic_write_text(report_json, report.to_json() + "\n")
            _atomic_write_text(out / "eval_report.md", report.to_markdown() + "\n")
            preds_path = out / "predictions.json"
            merged = {qid: text for preds in report.predictions.values()
                      for qid, text in preds.items()}
            _atomic_write_text(preds_path,
                               json.dumps(merged, indent=2, sort_keys=True) + "\n")
            _write_manifest(out, [report_json, out / "eval_report.md", preds_path])
    except Exception as exc:
        _fail_runtime(str(exc))


@main.command("gradcheck")
@click.option("--seed", default=0, show_default=True)
@click.option("--eps", default=1e-5, show_default=True)
def cmd_gradcheck(seed: int, eps: float) -> None:
    """Finite-difference check of all loss gradients on the toy model."""
    try:
        errors = run_loss_gradchecks(seed=seed, eps=eps)
    except Exception as exc:
        _fail_runtime(str(exc))
    worst = max(errors.values())
    for name, err in errors.items():
        click.echo(f"{name}: max relative error {err:.3e}")
    click.echo(f"worst: {worst:.3e} (tolerance {GRADCHECK_TOLERANCE:.0e})")
    if worst >= GRADCHECK_TOLERANCE:
        _fail_runtime("gradient check failed")


@main.command("probe")
@click.option("--checkpoint", required=True, type=click.Path(path_type=Path))
@click.option("--data", "data_paths", required=True, multiple=True,
              type=click.Path(path_type=Path),
              help="One file per domain; labels follow the order given.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path))
def cmd_probe(checkpoint: Path, data_paths: tuple[Path, ...], seed: int,
              out: Path | None) -> None:
    """Measure residual domain information in the pooled representation."""
    if len(data_paths) < 2:
        _fail_usage("probe needs at least 2 domain files")
    for p in (checkpoint, *data_paths):
        if not Path(p).exists():
            _fail_usage(f"file not found: {p}")
    try:
        ckpt = load_checkpoint(checkpoint)
        features = []
        labels = []
        for label, p in enumerate(data_paths):
            name = p.name.removesuffix(".gz").removesuffix(".jsonl")
            records = parse_mrqa_jsonl(p, name).records
            h = pooled_representations(records, ckpt.theta, ckpt.config, ckpt.vocab)
            features.append(h)
            labels.extend([label] * len(h))
        result = domain_probe(np.concatenate(features), np.array(labels), seed)
        payload = {
            "accuracy": result.accuracy,
            "chance": result.chance,
            "confusion": result.confusion.tolist(),
            "n_train": result.n_train,
            "n_test": result.n_test,
        }
        text = json.dumps(payload, indent=2) + "\n"
        click.echo(text, nl=False)
        if out:
            out.mkdir(parents=True, exist_ok=True)
            _atomic_write_text(out / "probe.json", text)
            _write_manifest(out, [out / "probe.json"])
    except Exception as exc:
        _fail_runtime(str(exc))


@main.command("report")
@click.option("--baseline", required=True, type=click.Path(path_type=Path))
@click.option("--adversarial", required=True, type=click.Path(path_type=Path))
@click.option("--out", type=click.Path(path_type=Path))
def cmd_report(baseline: Path, adversarial: Path, out: Path | None) -> None:
    """Merge two eval reports into one comparison table, better cells bolded.

    Averages are computed in exact decimal arithmetic from the per-dataset
    values, rounded half-up to two places.
    """
    for p in (baseline, adversarial):
        if not Path(p).exists():
            _fail_usage(f"report not found: {p}")
    try:
        rows = []
        for model, path in (("baseline", baseline), ("adversarial", adversarial)):
            payload = json.loads(path.read_text(), parse_float=Decimal)
            rows.append(comparison_from_report_dicts(model, payload))
        markdown, payload = render_comparison(rows)
        click.echo(markdown)
        if out:
            out.mkdir(parents=True, exist_ok=True)
            _atomic_write_text(out / "comparison.md", markdown + "\n")
            _atomic_write_text(out / "comparison.json",
                               json.dumps(payload, indent=2, sort_keys=True) + "\n")
            _write_manifest(out, [out / "comparison.md", out / "comparison.json"])
    except Exception as exc:
        _fail_runtime(str(exc))


if __name__ == "__main__":
    main()
