#!/usr/bin/env python3
"""Generate a synthetic dataset with ConMeC's per-category label counts.

The sentences are templated English, not release text: the file is for
exercising loaders, stats, evaluation, and batch plumbing in
environments where the release is unavailable. Gold labels follow the
release's documented distribution exactly, six categories of 1,000
sentences each, so `metonymy stats` on the output reproduces that
table (1,715 metonymic / 4,285 non-metonymic overall).

Usage:
  python3 scripts/make_synthetic_conmec.py -o synthetic_conmec.jsonl
"""

from __future__ import annotations

import argparse
from pathlib import Path

from metonymy.data import (
    METONYMIC,
    NON_METONYMIC,
    Dataset,
    Instance,
    dataset_stats,
    format_stats,
    write_dataset,
)

# metonymic count per 1,000-sentence category block
MET_PER_CATEGORY = {
    "container": 226,
    "producer": 129,
    "product": 406,
    "location": 454,
    "causer": 317,
    "possessed": 183,
}

CATEGORY_NOUN = {
    "container": "bottle",
    "producer": "painter",
    "product": "novel",
    "location": "village",
    "causer": "engine",
    "possessed": "badge",
}


def build() -> Dataset:
    instances: list[Instance] = []
    for category, met_count in MET_PER_CATEGORY.items():
        noun = CATEGORY_NOUN[category]
        for i in range(1000):
            label = METONYMIC if i < met_count else NON_METONYMIC
            instances.append(
                Instance(
                    id=f"{category}-{i:04d}",
                    sentence=f"Sentence {i} mentions the {noun} in passing.",
                    target=noun,
                    target_occurrence=0,
                    category=category,
                    gold=label,
                )
            )
    return Dataset(name="synthetic-conmec", instances=instances)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-o", "--out", type=Path, required=True, help="normalized JSONL to write")
    args = ap.parse_args(argv)

    dataset = build()
    write_dataset(dataset, args.out)
    print(format_stats(dataset_stats(dataset)))
    print(f"wrote {len(dataset)} instance(s) to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
