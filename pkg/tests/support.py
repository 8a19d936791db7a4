"""Shared test helpers: the 12-sentence sample's scripted backend rules,
engineered prediction sets, and a synthetic 6,000-row distribution twin."""

from __future__ import annotations

import json
from pathlib import Path

from metonymy.backend import ScriptRule, ScriptedBackend
from metonymy.data import (
    Dataset,
    Instance,
    METONYMIC,
    NON_METONYMIC,
    Prediction,
    VoteRecord,
)

FIXTURES = Path(__file__).parent / "fixtures"

# target -> (routed category word, final answer word) for the 12-sentence sample
SAMPLE12_SCRIPT = {
    "dish": ("CONTAINER", "METONYMIC"),
    "jug": ("CONTAINER", "LITERAL"),
    "historian": ("PRODUCER", "METONYMIC"),
    "musician": ("PRODUCER", "LITERAL"),
    "media": ("PRODUCT", "METONYMIC"),
    "magazine": ("PRODUCT", "LITERAL"),
    "stadium": ("LOCATION", "METONYMIC"),
    "office": ("LOCATION", "LITERAL"),
    "crowd": ("GENERAL", "METONYMIC"),
    "hammer": ("GENERAL", "LITERAL"),
    "muscle": ("GENERAL", "METONYMIC"),
    "gun": ("GENERAL", "LITERAL"),
}

# distinctive substrings of the two prompt kinds
CATEGORIZE_MARK = "exactly one word from this list"
CLASSIFY_MARK = "Final answer"


def sample12_rule_dicts() -> list[dict]:
    rules: list[dict] = []
    for target, (category, answer) in SAMPLE12_SCRIPT.items():
        anchor = f'Target word: "{target}"'
        rules.append({"contains": anchor, "regex": CATEGORIZE_MARK, "text": f"The word is a {category}."})
        rules.append(
            {
                "contains": anchor,
                "regex": CLASSIFY_MARK,
                "text": f"Step by step, the usage is clear.\nFinal answer: {answer}",
            }
        )
    return rules


def sample12_backend() -> ScriptedBackend:
    rules = [
        ScriptRule(text=r["text"], contains=r.get("contains"), regex=r.get("regex"))
        for r in sample12_rule_dicts()
    ]
    return ScriptedBackend(rules)


def write_script_json(path: Path) -> Path:
    path.write_text(json.dumps({"rules": sample12_rule_dicts()}), encoding="utf-8")
    return path


def make_instance(i: int, gold: str | None, category: str | None = None) -> Instance:
    return Instance(
        id=f"i{i:05d}",
        sentence=f"The subject number {i} keeps a sample word here.",
        target="sample",
        category=category,
        gold=gold,
    )


def engineered_set(
    tp: int, fp: int, fn: int, tn: int, n_votes: int = 1, category: str | None = None
) -> tuple[Dataset, list[Prediction]]:
    """A dataset plus predictions realizing exactly these confusion counts."""
    instances: list[Instance] = []
    predictions: list[Prediction] = []
    plan = (
        [(METONYMIC, METONYMIC)] * tp
        + [(NON_METONYMIC, METONYMIC)] * fp
        + [(METONYMIC, NON_METONYMIC)] * fn
        + [(NON_METONYMIC, NON_METONYMIC)] * tn
    )
    for i, (gold, predicted) in enumerate(plan):
        inst = make_instance(i, gold, category)
        instances.append(inst)
        votes = tuple(VoteRecord(label=predicted) for _ in range(n_votes))
        predictions.append(Prediction.from_votes(inst.id, "basic", votes))
    return Dataset(name="engineered", instances=instances), predictions


# Published per-category metonymic counts; every category holds 1,000 rows.
MET_PER_CATEGORY = {
    "container": 226,
    "producer": 129,
    "product": 406,
    "location": 454,
    "causer": 317,
    "possessed": 183,
}

_CATEGORY_NOUN = {
    "container": "bottle",
    "producer": "painter",
    "product": "novel",
    "location": "village",
    "causer": "engine",
    "possessed": "badge",
}


def synthetic_distribution_rows() -> list[dict]:
    """6,000 normalized rows with the published label distribution."""
    rows: list[dict] = []
    for category, met_count in MET_PER_CATEGORY.items():
        noun = _CATEGORY_NOUN[category]
        for i in range(1000):
            label = "metonymic" if i < met_count else "non-metonymic"
            rows.append(
                {
                    "id": f"{category}-{i:04d}",
                    "sentence": f"Sentence {i} mentions the {noun} in passing.",
                    "target": noun,
                    "target_index": 0,
                    "category": category,
                    "label": label,
                }
            )
    return rows


def write_synthetic_distribution(path: Path) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in synthetic_distribution_rows():
            fh.write(json.dumps(row) + "\n")
    return path
