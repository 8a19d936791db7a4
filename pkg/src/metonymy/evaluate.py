"""Scoring: confusion counts, per-class P/R/F1, macro-F1, per-category breakdowns,
Cohen's kappa for annotator agreement, and metonymic-F1 curves over vote counts.

The metonymic class is the positive class for confusion counts. All derived
numbers are computed from unrounded internals; rounding happens only in the
text formatters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from .data import CATEGORIES, Dataset, LABELS, METONYMIC, NON_METONYMIC, Prediction


class EvalError(ValueError):
    """Raised when inputs cannot be scored."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary counts with the metonymic class as positive."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict[str, int]:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> dict[str, float]:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1}


def _pairs(
    predictions: Sequence[Prediction], dataset: Dataset
) -> list[tuple[str, str, str | None]]:
    """(gold, predicted, category) per prediction; every id must carry a gold label."""
    gold_by_id = dataset.by_id()
    seen: set[str] = set()
    out: list[tuple[str, str, str | None]] = []
    for pred in predictions:
        if pred.id in seen:
            raise EvalError(f"duplicate prediction id {pred.id!r}")
        seen.add(pred.id)
        inst = gold_by_id.get(pred.id)
        if inst is None:
            raise EvalError(f"prediction for unknown id {pred.id!r}")
        if inst.gold is None:
            raise EvalError(f"instance {pred.id!r} has no gold label")
        out.append((inst.gold, pred.final, inst.category))
    return out


def confusion(predictions: Sequence[Prediction], dataset: Dataset) -> ConfusionCounts:
    return _confusion_from_pairs(_pairs(predictions, dataset))


def _confusion_from_pairs(pairs: Iterable[tuple[str, str, str | None]]) -> ConfusionCounts:
    tp = fp = fn = tn = 0
    for gold, predicted, _ in pairs:
        if predicted == METONYMIC:
            if gold == METONYMIC:
                tp += 1
            else:
                fp += 1
        else:
            if gold == METONYMIC:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


def prf(counts: ConfusionCounts, positive: str = METONYMIC) -> PRF:
    """Precision/recall/F1 for either class; 0/0 ratios resolve to 0."""
    if positive == METONYMIC:
        tp, fp, fn = counts.tp, counts.fp, counts.fn
    elif positive == NON_METONYMIC:
        tp, fp, fn = counts.tn, counts.fn, counts.fp
    else:
        raise EvalError(f"unknown positive class {positive!r}")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1)


@dataclass(frozen=True)
class CategoryMetrics:
    metonymic_f1: float
    non_metonymic_f1: float
    support: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "metonymic_f1": self.metonymic_f1,
            "non_metonymic_f1": self.non_metonymic_f1,
            "support": self.support,
        }


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: float
    metonymic: PRF
    non_metonymic: PRF
    macro_f1: float
    per_category: dict[str, CategoryMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "counts": self.counts.to_dict(),
            "accuracy": self.accuracy,
            "metonymic": self.metonymic.to_dict(),
            "non_metonymic": self.non_metonymic.to_dict(),
            "macro_f1": self.macro_f1,
            "per_category": {cat: m.to_dict() for cat, m in self.per_category.items()},
        }


def report(predictions: Sequence[Prediction], dataset: Dataset) -> MetricsReport:
    """Full scoring report. Accuracy and macro-F1 use unrounded class metrics."""
    if not predictions:
        raise EvalError("no predictions to score")
    pairs = _pairs(predictions, dataset)
    counts = _confusion_from_pairs(pairs)
    met = prf(counts, METONYMIC)
    non = prf(counts, NON_METONYMIC)
    accuracy = (counts.tp + counts.tn) / counts.total
    macro_f1 = (met.f1 + non.f1) / 2

    per_category: dict[str, CategoryMetrics] = {}
    for cat in CATEGORIES:
        sub = [p for p in pairs if p[2] == cat]
        if not sub:
            continue
        sub_counts = _confusion_from_pairs(sub)
        per_category[cat] = CategoryMetrics(
            metonymic_f1=prf(sub_counts, METONYMIC).f1,
            non_metonymic_f1=prf(sub_counts, NON_METONYMIC).f1,
            support=len(sub),
        )
    return MetricsReport(
        counts=counts,
        accuracy=accuracy,
        metonymic=met,
        non_metonymic=non,
        macro_f1=macro_f1,
        per_category=per_category,
    )


def format_report(r: MetricsReport) -> str:
    """Aligned plain-text table mirroring the JSON report."""
    rows = [
        ("", "precision", "recall", "f1", "support"),
        (
            "metonymic",
            f"{r.metonymic.precision:.4f}",
            f"{r.metonymic.recall:.4f}",
            f"{r.metonymic.f1:.4f}",
            str(r.counts.tp + r.counts.fn),
        ),
        (
            "non-metonymic",
            f"{r.non_metonymic.precision:.4f}",
            f"{r.non_metonymic.recall:.4f}",
            f"{r.non_metonymic.f1:.4f}",
            str(r.counts.fp + r.counts.tn),
        ),
    ]
    widths = [max(len(row[i]) for row in rows) for i in range(5)]
    lines = ["  ".join(row[i].ljust(widths[i]) for i in range(5)).rstrip() for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    c = r.counts
    lines.append("")
    lines.append(f"accuracy  {r.accuracy:.4f}    macro-f1  {r.macro_f1:.4f}    n  {c.total}")
    lines.append(f"counts    tp {c.tp}  fp {c.fp}  fn {c.fn}  tn {c.tn}")
    if r.per_category:
        lines.append("")
        cat_rows = [("category", "met-f1", "non-f1", "support")]
        for cat, m in r.per_category.items():
            cat_rows.append(
                (cat, f"{m.metonymic_f1:.4f}", f"{m.non_metonymic_f1:.4f}", str(m.support))
            )
        cw = [max(len(row[i]) for row in cat_rows) for i in range(4)]
        lines.append("  ".join(cat_rows[0][i].ljust(cw[i]) for i in range(4)).rstrip())
        lines.append("  ".join("-" * w for w in cw))
        for row in cat_rows[1:]:
            lines.append("  ".join(row[i].ljust(cw[i]) for i in range(4)).rstrip())
    return "\n".join(lines)


@dataclass(frozen=True)
class KappaReport:
    observed: float
    expected: float
    kappa: float

    def to_dict(self) -> dict[str, float]:
        return {"observed": self.observed, "expected": self.expected, "kappa": self.kappa}


def cohen_kappa(a: Sequence[str], b: Sequence[str]) -> KappaReport:
    """Two-annotator Cohen's kappa over the binary label vocabulary."""
    if len(a) != len(b):
        raise EvalError(f"label lists differ in length: {len(a)} vs {len(b)}")
    if not a:
        raise EvalError("label lists are empty")
    for lab in list(a) + list(b):
        if lab not in LABELS:
            raise EvalError(f"unknown label {lab!r}")
    n = len(a)
    observed = sum(1 for x, y in zip(a, b) if x == y) / n
    expected = sum(
        (sum(1 for x in a if x == lab) / n) * (sum(1 for y in b if y == lab) / n)
        for lab in LABELS
    )
    if expected == 1.0:
        kappa = 1.0 if observed == 1.0 else 0.0
    else:
        kappa = (observed - expected) / (1 - expected)
    return KappaReport(observed=observed, expected=expected, kappa=kappa)


@dataclass(frozen=True)
class VotePoint:
    n_votes: int
    metonymic_f1: float
    delta: float

    def to_dict(self) -> dict[str, float | int]:
        return {"n_votes": self.n_votes, "metonymic_f1": self.metonymic_f1, "delta": self.delta}


def vote_curve(
    prediction_sets: dict[int, Sequence[Prediction]], dataset: Dataset
) -> list[VotePoint]:
    """Metonymic F1 per vote count, with deltas against the single-vote run."""
    if 1 not in prediction_sets:
        raise EvalError("vote curve needs a single-vote (n=1) baseline")
    id_sets = {n: {p.id for p in preds} for n, preds in prediction_sets.items()}
    base_ids = id_sets[1]
    for n, ids in id_sets.items():
        if n < 1 or n % 2 == 0:
            raise EvalError(f"vote counts must be odd and positive, got {n}")
        if ids != base_ids:
            raise EvalError(f"prediction set for n={n} covers different ids than n=1")
    points: list[VotePoint] = []
    base_f1 = prf(confusion(list(prediction_sets[1]), dataset), METONYMIC).f1
    for n in sorted(prediction_sets):
        f1 = prf(confusion(list(prediction_sets[n]), dataset), METONYMIC).f1
        points.append(VotePoint(n_votes=n, metonymic_f1=f1, delta=f1 - base_f1))
    return points


def format_vote_curve(points: Sequence[VotePoint]) -> str:
    rows = [("n_votes", "met-f1", "delta")]
    for p in points:
        rows.append((str(p.n_votes), f"{p.metonymic_f1:.4f}", f"{p.delta:+.4f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(3)]
    lines = ["  ".join(rows[0][i].ljust(widths[i]) for i in range(3)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows[1:]:
        lines.append("  ".join(row[i].ljust(widths[i]) for i in range(3)).rstrip())
    return "\n".join(lines)


def vote_curve_csv(points: Sequence[VotePoint]) -> str:
    lines = ["n_votes,metonymic_f1,delta"]
    for p in points:
        lines.append(f"{p.n_votes},{p.metonymic_f1!r},{p.delta!r}")
    return "\n".join(lines) + "\n"


def write_report_json(r: MetricsReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(r.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
