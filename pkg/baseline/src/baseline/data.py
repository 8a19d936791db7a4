"""Instance and prediction JSONL handling for the encoder baseline.

This package talks to the classifier pipeline only through its file
formats. The wire contract (field names, label spellings, the token
rule behind target occurrences) is restated here on purpose so the two
packages stay importable in isolation; any change must be made in both.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

METONYMIC = "metonymic"
NON_METONYMIC = "non-metonymic"
LABELS = (METONYMIC, NON_METONYMIC)
# non-metonymic is spelled "literal" on the wire
WIRE_LITERAL = "literal"

CATEGORIES = ("container", "producer", "product", "location", "causer", "possessed")

# token = alphabetic run with internal hyphens; digits/underscores break tokens
_TOKEN_RE = re.compile(r"[^\W\d_]+(?:-[^\W\d_]+)*")

OPEN_MARK = "[tgt]"
CLOSE_MARK = "[/tgt]"


class BaselineError(Exception):
    """Domain error raised for invalid data or configuration."""


@dataclass(frozen=True)
class LoadError(BaselineError):
    path: str
    line: int
    reason: str

    def __str__(self) -> str:
        return f"{self.path}:{self.line}: {self.reason}"


def token_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def locate_target(sentence: str, target: str, occurrence: int = 0) -> tuple[int, int]:
    """Char span of the ``occurrence``-th case-insensitive whole-token match."""
    if occurrence < 0:
        raise BaselineError(f"occurrence must be >= 0, got {occurrence}")
    want = target.casefold()
    seen = 0
    for start, end in token_spans(sentence):
        if sentence[start:end].casefold() == want:
            if seen == occurrence:
                return start, end
            seen += 1
    raise BaselineError(
        f"target {target!r} occurrence {occurrence} not found "
        f"({seen} whole-token occurrence(s) in sentence)"
    )


@dataclass(frozen=True)
class Instance:
    """One gold-labeled target noun in one sentence."""

    id: str
    sentence: str
    target: str
    target_occurrence: int = 0
    category: str | None = None
    gold: str | None = None

    def __post_init__(self) -> None:
        if not self.id or not isinstance(self.id, str):
            raise BaselineError("id must be a non-empty string")
        if not self.sentence or not isinstance(self.sentence, str):
            raise BaselineError(f"{self.id}: sentence must be a non-empty string")
        if not self.target or not isinstance(self.target, str):
            raise BaselineError(f"{self.id}: target must be a non-empty string")
        if not isinstance(self.target_occurrence, int) or isinstance(
            self.target_occurrence, bool
        ) or self.target_occurrence < 0:
            raise BaselineError(f"{self.id}: target_index must be a non-negative int")
        if self.category is not None and self.category not in CATEGORIES:
            raise BaselineError(f"{self.id}: unknown category {self.category!r}")
        if self.gold is not None and self.gold not in LABELS:
            raise BaselineError(f"{self.id}: unknown label {self.gold!r}")
        locate_target(self.sentence, self.target, self.target_occurrence)


def mark_target(instance: Instance) -> str:
    """The instance sentence with its target occurrence wrapped in sentinels.

    The markers are registered as tokenizer special tokens, so the encoder
    sees the target position even when the sentence repeats the noun.
    """
    start, end = locate_target(
        instance.sentence, instance.target, instance.target_occurrence
    )
    return (
        f"{instance.sentence[:start]}{OPEN_MARK} "
        f"{instance.sentence[start:end]} {CLOSE_MARK}{instance.sentence[end:]}"
    )


def _instance_from_row(row: Any) -> Instance:
    if not isinstance(row, dict):
        raise BaselineError(f"row is {type(row).__name__}, not an object")
    label = row.get("label")
    if label == WIRE_LITERAL:
        label = NON_METONYMIC
    occurrence = row.get("target_index", 0)
    return Instance(
        id=row.get("id"),
        sentence=row.get("sentence"),
        target=row.get("target"),
        target_occurrence=0 if occurrence is None else occurrence,
        category=row.get("category"),
        gold=label,
    )


def load_instances(path: str | Path, *, require_labels: bool = True) -> list[Instance]:
    """Instances from normalized JSONL; any bad line is an error, not a skip."""
    path = Path(path)
    instances: list[Instance] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                inst = _instance_from_row(json.loads(line))
            except (json.JSONDecodeError, BaselineError) as exc:
                raise LoadError(str(path), line_no, str(exc)) from exc
            if inst.id in seen:
                raise LoadError(str(path), line_no, f"duplicate instance id {inst.id!r}")
            if require_labels and inst.gold is None:
                raise LoadError(str(path), line_no, f"{inst.id}: instance has no gold label")
            seen.add(inst.id)
            instances.append(inst)
    if not instances:
        raise BaselineError(f"{path}: no instances")
    return instances


def write_predictions(path: str | Path, labels: list[tuple[str, str]]) -> None:
    """Prediction JSONL consumable by the classifier pipeline's evaluator.

    One single-vote row per (instance id, label); non-metonymic is written
    with its wire spelling.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst_id, label in labels:
            if label not in LABELS:
                raise BaselineError(f"{inst_id}: unknown label {label!r}")
            wire = WIRE_LITERAL if label == NON_METONYMIC else label
            row = {
                "id": inst_id,
                "strategy": "encoder",
                "final": wire,
                "votes": [{"label": wire, "category": None}],
                "parse_failures": 0,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
