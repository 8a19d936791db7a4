"""Core data model: labeled instances, datasets, predictions, and their JSONL wire formats.

A dataset row describes one target common noun inside one sentence, optionally
with a gold label (metonymic vs non-metonymic), a semantic category, and
surrounding context sentences. Predictions carry one or more votes plus the
majority decision.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

log = logging.getLogger(__name__)

# Canonical label strings (dataset wire format uses the same spellings).
METONYMIC = "metonymic"
NON_METONYMIC = "non-metonymic"
LABELS = (METONYMIC, NON_METONYMIC)

# Prediction wire format spells the negative class "literal".
LITERAL = "literal"

# Dataset-side semantic categories of the target noun.
CATEGORIES = ("container", "producer", "product", "location", "causer", "possessed")

# Strategy tokens the classifier emits. The wire field accepts any lowercase
# token so prediction files from other producers (e.g. an encoder baseline)
# still load and evaluate.
STRATEGIES = ("basic", "cot", "cot2s")
_STRATEGY_TOKEN_RE = re.compile(r"^[a-z0-9][a-z0-9-]*$")

# A token is a maximal run of alphabetic characters, allowing internal hyphens.
_TOKEN_RE = re.compile(r"[^\W\d_]+(?:-[^\W\d_]+)*")


class DataError(ValueError):
    """Raised when a record violates the data model."""


class LoadError(DataError):
    """Raised for unrecoverable file-level problems; carries a line number."""

    def __init__(self, path: str | Path, line: int, reason: str) -> None:
        super().__init__(f"{path}:{line}: {reason}")
        self.path = str(path)
        self.line = line
        self.reason = reason


def token_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of every token in ``text``, left to right."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def locate_target(sentence: str, target: str, occurrence: int = 0) -> tuple[int, int]:
    """Char span of the ``occurrence``-th case-insensitive whole-token match of ``target``.

    Raises DataError when the sentence has no such occurrence.
    """
    if occurrence < 0:
        raise DataError(f"occurrence must be >= 0, got {occurrence}")
    want = target.casefold()
    seen = 0
    for start, end in token_spans(sentence):
        if sentence[start:end].casefold() == want:
            if seen == occurrence:
                return start, end
            seen += 1
    raise DataError(
        f"target {target!r} occurrence {occurrence} not found "
        f"({seen} whole-token occurrence(s) in sentence)"
    )


def count_occurrences(sentence: str, target: str) -> int:
    want = target.casefold()
    return sum(1 for s, e in token_spans(sentence) if sentence[s:e].casefold() == want)


@dataclass(frozen=True)
class Instance:
    """One target noun in one sentence, with optional gold label and category."""

    id: str
    sentence: str
    target: str
    target_occurrence: int = 0
    category: str | None = None
    gold: str | None = None
    context_before: str | None = None
    context_after: str | None = None

    def __post_init__(self) -> None:
        if not self.id or not isinstance(self.id, str):
            raise DataError("id must be a non-empty string")
        if not self.sentence or not isinstance(self.sentence, str):
            raise DataError(f"{self.id}: sentence must be a non-empty string")
        if not self.target or not isinstance(self.target, str):
            raise DataError(f"{self.id}: target must be a non-empty string")
        if not isinstance(self.target_occurrence, int) or self.target_occurrence < 0:
            raise DataError(f"{self.id}: target_occurrence must be a non-negative int")
        if self.category is not None and self.category not in CATEGORIES:
            raise DataError(f"{self.id}: unknown category {self.category!r}")
        if self.gold is not None and self.gold not in LABELS:
            raise DataError(f"{self.id}: unknown label {self.gold!r}")
        n = count_occurrences(self.sentence, self.target)
        if n < self.target_occurrence + 1:
            raise DataError(
                f"{self.id}: target {self.target!r} occurs {n} time(s), "
                f"need at least {self.target_occurrence + 1}"
            )

    def target_span(self) -> tuple[int, int]:
        return locate_target(self.sentence, self.target, self.target_occurrence)

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "id": self.id,
            "sentence": self.sentence,
            "target": self.target,
            "target_index": self.target_occurrence,
            "category": self.category,
            "label": self.gold,
        }
        if self.context_before is not None:
            row["context_before"] = self.context_before
        if self.context_after is not None:
            row["context_after"] = self.context_after
        return row

    @classmethod
    def from_row(cls, row: Any) -> "Instance":
        if not isinstance(row, dict):
            raise DataError(f"row must be an object, got {type(row).__name__}")
        for key in ("id", "sentence", "target"):
            if key not in row:
                raise DataError(f"missing required key {key!r}")
            if not isinstance(row[key], str):
                raise DataError(f"key {key!r} must be a string")
        occurrence = row.get("target_index", 0)
        if occurrence is None:
            occurrence = 0
        if isinstance(occurrence, bool) or not isinstance(occurrence, int):
            raise DataError("target_index must be an integer")
        for key in ("category", "label", "context_before", "context_after"):
            if key in row and row[key] is not None and not isinstance(row[key], str):
                raise DataError(f"key {key!r} must be a string or null")
        return cls(
            id=row["id"],
            sentence=row["sentence"],
            target=row["target"],
            target_occurrence=occurrence,
            category=row.get("category"),
            gold=row.get("label"),
            context_before=row.get("context_before"),
            context_after=row.get("context_after"),
        )


@dataclass
class Dataset:
    """An ordered collection of instances with unique ids."""

    name: str
    instances: list[Instance] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for inst in self.instances:
            if inst.id in seen:
                raise DataError(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self) -> Iterator[Instance]:
        return iter(self.instances)

    def by_id(self) -> dict[str, Instance]:
        return {inst.id: inst for inst in self.instances}


@dataclass(frozen=True)
class RowError:
    """A rejected input row: 1-based line number plus the reason."""

    line: int
    reason: str


def load_dataset(
    path: str | Path,
    name: str | None = None,
    *,
    strict: bool = False,
    rejects: list[RowError] | None = None,
) -> Dataset:
    """Load a normalized JSONL dataset.

    Rows that fail validation are rejected and reported (warning log plus the
    optional ``rejects`` sink); with ``strict=True`` the first bad row raises
    LoadError instead. Duplicate ids keep the first row.
    """
    path = Path(path)
    instances: list[Instance] = []
    ids: set[str] = set()

    def reject(line_no: int, reason: str) -> None:
        if strict:
            raise LoadError(path, line_no, reason)
        log.warning("%s:%d: rejected row: %s", path, line_no, reason)
        if rejects is not None:
            rejects.append(RowError(line_no, reason))

    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                reject(line_no, f"malformed JSON: {exc.msg}")
                continue
            try:
                inst = Instance.from_row(row)
            except DataError as exc:
                reject(line_no, str(exc))
                continue
            if inst.id in ids:
                reject(line_no, f"duplicate id {inst.id!r}")
                continue
            ids.add(inst.id)
            instances.append(inst)
    return Dataset(name=name or path.stem, instances=instances)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in dataset:
            fh.write(json.dumps(inst.to_row(), ensure_ascii=False) + "\n")


@dataclass
class CategoryCount:
    """Label tallies for one category row of the stats table."""

    metonymic: int = 0
    non_metonymic: int = 0
    unlabeled: int = 0

    @property
    def total(self) -> int:
        return self.metonymic + self.non_metonymic + self.unlabeled


@dataclass
class DatasetStats:
    """Per-category label counts plus the dataset-wide total row."""

    rows: dict[str | None, CategoryCount]
    total: CategoryCount


def dataset_stats(dataset: Dataset) -> DatasetStats:
    """Count labels per category. Row sums always equal the dataset size."""
    rows: dict[str | None, CategoryCount] = {cat: CategoryCount() for cat in CATEGORIES}
    total = CategoryCount()
    for inst in dataset:
        row = rows.setdefault(inst.category, CategoryCount())
        if inst.gold == METONYMIC:
            row.metonymic += 1
            total.metonymic += 1
        elif inst.gold == NON_METONYMIC:
            row.non_metonymic += 1
            total.non_metonymic += 1
        else:
            row.unlabeled += 1
            total.unlabeled += 1
    return DatasetStats(rows=rows, total=total)


def format_stats(stats: DatasetStats) -> str:
    """Aligned plain-text stats table."""
    header = ("category", "metonymic", "non-metonymic", "unlabeled", "total")
    body: list[tuple[str, str, str, str, str]] = []
    for cat, row in stats.rows.items():
        body.append(
            (
                cat if cat is not None else "(none)",
                str(row.metonymic),
                str(row.non_metonymic),
                str(row.unlabeled),
                str(row.total),
            )
        )
    t = stats.total
    body.append(("total", str(t.metonymic), str(t.non_metonymic), str(t.unlabeled), str(t.total)))
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) for i in range(len(header))]
    lines = ["  ".join(header[i].ljust(widths[i]) for i in range(len(header)))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(header))))
    return "\n".join(lines)


# Semantic categories a classifier may route through. Causer and possessed
# targets have no dedicated route and fall under "general".
SEMANTIC_CATEGORIES = ("container", "producer", "product", "location", "general")


class PredictionError(DataError):
    """Raised when a prediction violates its invariants."""


def majority_label(labels: Iterable[str]) -> str:
    """Strict majority of an odd-length label sequence."""
    labels = list(labels)
    if not labels or len(labels) % 2 == 0:
        raise PredictionError(f"need an odd number of votes, got {len(labels)}")
    met = sum(1 for lab in labels if lab == METONYMIC)
    return METONYMIC if met * 2 > len(labels) else NON_METONYMIC


def _modal_category(votes: Iterable["VoteRecord"]) -> str | None:
    counts: dict[str, int] = {}
    order: list[str] = []
    for v in votes:
        if v.category is None:
            continue
        if v.category not in counts:
            counts[v.category] = 0
            order.append(v.category)
        counts[v.category] += 1
    if not counts:
        return None
    best = max(counts.values())
    for cat in order:  # earliest vote wins ties
        if counts[cat] == best:
            return cat
    return None


@dataclass(frozen=True)
class VoteRecord:
    """One vote: a parsed label, optionally the routed semantic category."""

    label: str
    category: str | None = None
    trace_ref: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise PredictionError(f"unknown vote label {self.label!r}")
        if self.category is not None and self.category not in SEMANTIC_CATEGORIES:
            raise PredictionError(f"unknown vote category {self.category!r}")


def _label_to_wire(label: str) -> str:
    return LITERAL if label == NON_METONYMIC else label


def _label_from_wire(value: Any) -> str:
    if value == METONYMIC:
        return METONYMIC
    if value == LITERAL:
        return NON_METONYMIC
    raise PredictionError(f"unknown wire label {value!r}")


@dataclass(frozen=True)
class Prediction:
    """The classifier's output for one instance: votes plus the majority call."""

    id: str
    strategy: str
    votes: tuple[VoteRecord, ...]
    final: str
    parse_failures: int = 0
    predicted_category: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise PredictionError("prediction id must be non-empty")
        if not _STRATEGY_TOKEN_RE.match(self.strategy or ""):
            raise PredictionError(f"invalid strategy token {self.strategy!r}")
        if not self.votes or len(self.votes) % 2 == 0:
            raise PredictionError(
                f"{self.id}: need an odd, non-empty vote count, got {len(self.votes)}"
            )
        want = majority_label(v.label for v in self.votes)
        if self.final != want:
            raise PredictionError(
                f"{self.id}: final {self.final!r} is not the vote majority {want!r}"
            )
        if not isinstance(self.parse_failures, int) or not (
            0 <= self.parse_failures <= len(self.votes)
        ):
            raise PredictionError(f"{self.id}: parse_failures out of range")
        if (
            self.predicted_category is not None
            and self.predicted_category not in SEMANTIC_CATEGORIES
        ):
            raise PredictionError(
                f"{self.id}: unknown predicted category {self.predicted_category!r}"
            )

    @classmethod
    def from_votes(
        cls,
        id: str,
        strategy: str,
        votes: Iterable[VoteRecord],
        parse_failures: int = 0,
    ) -> "Prediction":
        votes = tuple(votes)
        return cls(
            id=id,
            strategy=strategy,
            votes=votes,
            final=majority_label(v.label for v in votes),
            parse_failures=parse_failures,
            predicted_category=_modal_category(votes),
        )

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "id": self.id,
            "strategy": self.strategy,
            "final": _label_to_wire(self.final),
            "votes": [],
            "parse_failures": self.parse_failures,
        }
        for v in self.votes:
            vote: dict[str, Any] = {"label": _label_to_wire(v.label)}
            if v.category is not None:
                vote["category"] = v.category
            row["votes"].append(vote)
        return row

    @classmethod
    def from_row(cls, row: Any) -> "Prediction":
        if not isinstance(row, dict):
            raise PredictionError(f"row must be an object, got {type(row).__name__}")
        for key in ("id", "strategy", "final", "votes", "parse_failures"):
            if key not in row:
                raise PredictionError(f"missing required key {key!r}")
        if not isinstance(row["votes"], list):
            raise PredictionError("votes must be an array")
        votes = []
        for v in row["votes"]:
            if not isinstance(v, dict) or "label" not in v:
                raise PredictionError("each vote must be an object with a label")
            votes.append(
                VoteRecord(label=_label_from_wire(v["label"]), category=v.get("category"))
            )
        parse_failures = row["parse_failures"]
        if isinstance(parse_failures, bool) or not isinstance(parse_failures, int):
            raise PredictionError("parse_failures must be an integer")
        pred = cls.from_votes(
            id=row["id"],
            strategy=row["strategy"],
            votes=votes,
            parse_failures=parse_failures,
        )
        if _label_to_wire(pred.final) != row["final"]:
            raise PredictionError(
                f"{pred.id}: stored final {row['final']!r} disagrees with vote majority"
            )
        return pred


def write_predictions(predictions: Iterable[Prediction], path: str | Path) -> None:
    """Write predictions as JSONL. Invariants were checked at construction."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for pred in predictions:
            fh.write(json.dumps(pred.to_row(), ensure_ascii=False) + "\n")


def read_predictions(path: str | Path) -> list[Prediction]:
    """Read a prediction JSONL file. Any corrupt line raises, naming its number."""
    path = Path(path)
    out: list[Prediction] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                pred = Prediction.from_row(row)
            except (json.JSONDecodeError, DataError) as exc:
                raise LoadError(path, line_no, str(exc)) from exc
            if pred.id in seen:
                raise LoadError(path, line_no, f"duplicate prediction id {pred.id!r}")
            seen.add(pred.id)
            out.append(pred)
    return out
