import json
from pathlib import Path

from baseline.data import CATEGORIES, METONYMIC, NON_METONYMIC, Instance

# the words the synthetic sentences use (digits fall to [UNK], harmless)
VOCAB_WORDS = [
    "the", "a", "he", "she", "they", "it", "man", "woman", "crowd",
    "drank", "emptied", "finished", "raised", "held", "washed", "filled",
    "read", "praised", "wrote", "visited", "reached", "left", "heard",
    "whole", "old", "new", "quiet", "loud", "slowly", "again", "twice",
    "bottle", "glass", "painter", "writer", "novel", "paper", "village",
    "stadium", "engine", "storm", "badge", "wallet", "in", "from", "of",
    "and", "was", "is", "on", "at", "room", "table", "street", "sentence",
    "mentions", "passing", "number",
]

_NOUN = {
    "container": "bottle",
    "producer": "painter",
    "product": "novel",
    "location": "village",
    "causer": "engine",
    "possessed": "badge",
}


def make_instances(n: int, categories: tuple[str, ...] = CATEGORIES) -> list[Instance]:
    """n labeled instances cycling over categories, labels alternating."""
    instances = []
    for i in range(n):
        category = categories[i % len(categories)]
        noun = _NOUN[category]
        gold = METONYMIC if i % 2 == 0 else NON_METONYMIC
        instances.append(
            Instance(
                id=f"t{i:03d}",
                sentence=f"Sentence number {i} mentions the {noun} in passing.",
                target=noun,
                category=category,
                gold=gold,
            )
        )
    return instances


def write_rows(path: Path, rows: list[dict]) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path
