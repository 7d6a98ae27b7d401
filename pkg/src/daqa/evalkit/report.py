"""Evaluation reports: per-dataset rows, macro averages, comparison tables."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence


@dataclass(frozen=True)
class DatasetScore:
    name: str
    em: float   # percent
    f1: float   # percent
    n: int

    def __post_init__(self):
        if not (0.0 <= self.em <= 100.0 and 0.0 <= self.f1 <= 100.0):
            raise ValueError("EM and F1 must be percentages in [0, 100]")


@dataclass
class EvalReport:
    rows: list[DatasetScore]
    probe_accuracy: float | None = None
    probe_confusion: list[list[int]] | None = None
    predictions: dict[str, dict[str, str]] = field(default_factory=dict)

    @property
    def macro_em(self) -> float:
        return sum(r.em for r in self.rows) / len(self.rows)

    @property
    def macro_f1(self) -> float:
        return sum(r.f1 for r in self.rows) / len(self.rows)

    def to_dict(self) -> dict:
        payload = {
            "datasets": [{"name": r.name, "em": r.em, "f1": r.f1, "n": r.n}
                         for r in self.rows],
            "macro": {"em": self.macro_em, "f1": self.macro_f1},
        }
        if self.probe_accuracy is not None:
            payload["probe"] = {"accuracy": self.probe_accuracy,
                                "confusion": self.probe_confusion}
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_markdown(self) -> str:
        lines = ["| Dataset | EM | F1 | n |", "|---|---|---|---|"]
        for r in self.rows:
            lines.append(f"| {r.name} | {r.em:.2f} | {r.f1:.2f} | {r.n} |")
        lines.append(f"| **Avg** | {self.macro_em:.2f} | {self.macro_f1:.2f} | |")
        return "\n".join(lines)

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalReport":
        rows = [DatasetScore(name=d["name"], em=float(d["em"]), f1=float(d["f1"]),
                             n=int(d.get("n", 0)))
                for d in payload["datasets"]]
        probe = payload.get("probe") or {}
        return cls(rows=rows, probe_accuracy=probe.get("accuracy"),
                   probe_confusion=probe.get("confusion"))


def _round2(value: Decimal) -> Decimal:
    return value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class ComparisonRow:
    """One model's per-dataset scores as exact decimals."""

    model: str
    scores: dict[str, tuple[Decimal, Decimal]]   # name -> (em, f1)


def comparison_from_report_dicts(model: str, payload: dict) -> ComparisonRow:
    """Build a comparison row from a report JSON parsed with Decimal floats."""
    scores = {}
    for d in payload["datasets"]:
        scores[str(d["name"])] = (Decimal(str(d["em"])), Decimal(str(d["f1"])))
    return ComparisonRow(model=model, scores=scores)


def render_comparison(rows: Sequence[ComparisonRow]) -> tuple[str, dict]:
    """Side-by-side EM/F1 table over shared datasets, better cell bolded.

    Averages are unweighted across datasets, computed in exact decimal
    arithmetic and rounded half-up to two places.
    """
    if not rows:
        raise ValueError("nothing to compare")
    datasets = list(rows[0].scores)
    for row in rows[1:]:
        if list(row.scores) != datasets:
            raise ValueError("models must report the same datasets in the same order")

    averages = {}
    for row in rows:
        k = len(datasets)
        avg_em = _round2(sum(row.scores[d][0] for d in datasets) / k)
        avg_f1 = _round2(sum(row.scores[d][1] for d in datasets) / k)
        averages[row.model] = (avg_em, avg_f1)

    def cells(row: ComparisonRow) -> list[Decimal]:
        flat = []
        for d in datasets:
            flat.extend(row.scores[d])
        flat.extend(averages[row.model])
        return flat

    table = [cells(row) for row in rows]
    best = [max(col) for col in zip(*table)]

    header = "| Model |" + "".join(f" {d} EM | {d} F1 |" for d in datasets) \
        + " Avg EM | Avg F1 |"
    rule = "|---|" + "---|" * (2 * len(datasets) + 2)
    lines = [header, rule]
    for row, flat in zip(rows, table):
        rendered = [f"**{v}**" if v == best[i] else f"{v}"
                    for i, v in enumerate(flat)]
        lines.append(f"| {row.model} | " + " | ".join(rendered) + " |")

    payload = {
        "datasets": datasets,
        "models": [row.model for row in rows],
        "scores": {row.model: {d: [str(row.scores[d][0]), str(row.scores[d][1])]
                               for d in datasets} for row in rows},
        "averages": {m: [str(em), str(f1)] for m, (em, f1) in averages.items()},
    }
    return "\n".join(lines), payload
