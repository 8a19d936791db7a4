#!/usr/bin/env python3
"""Convert a Pedinotti-Lenci-style noun-verb inventory into seed JSONL.

One-shot converter, not library API. The output is the seed-pair file
consumed by `metonymy augment`: one JSON object per line with "noun",
"verb", "sentence", and "category".

Assumed source layout, remappable via flags: CSV/TSV/JSONL records with
a noun lemma and a verb lemma, optionally a template sentence and a
semantic category. When the source has no sentence column, a template
sentence is synthesized from --sentence-template. The category comes
from --category-key or the fixed --category (one of the two is
required). Pairs are deduplicated after casefolding; the summary prints
unique pair / noun / verb counts so the result can be audited against
the inventory's documented size.

Usage:
  python3 scripts/convert_pedinotti.py inventory.tsv -o seeds.jsonl --category container
  python3 scripts/convert_pedinotti.py pairs.jsonl -o seeds.jsonl --category-key class
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Iterator

from metonymy.data import CATEGORIES
from metonymy.mining import MiningError, SeedPair


def iter_records(path: Path) -> Iterator[tuple[str, dict[str, Any]]]:
    suffix = path.suffix.lower()
    if suffix == ".jsonl":
        with path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield f"{path}:{line_no}", json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SystemExit(f"error: {path}:{line_no}: {exc}") from exc
    elif suffix in (".csv", ".tsv"):
        delim = "\t" if suffix == ".tsv" else ","
        with path.open("r", encoding="utf-8", newline="") as fh:
            for line_no, record in enumerate(csv.DictReader(fh, delimiter=delim), start=2):
                yield f"{path}:{line_no}", record
    else:
        raise SystemExit(f"error: unsupported file type {path} (expect .jsonl/.csv/.tsv)")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="inventory file (.jsonl/.csv/.tsv)")
    ap.add_argument("-o", "--out", type=Path, required=True, help="seed JSONL to write")
    ap.add_argument("--noun-key", default="noun")
    ap.add_argument("--verb-key", default="verb")
    ap.add_argument("--sentence-key", default=None, help="field with a template sentence")
    ap.add_argument("--category-key", default=None, help="field with the semantic category")
    ap.add_argument("--category", default=None, choices=CATEGORIES, help="fixed category for every pair")
    ap.add_argument(
        "--sentence-template",
        default="The man {verb}s the {noun}.",
        help="template used when the source has no sentence column",
    )
    args = ap.parse_args(argv)

    if (args.category is None) == (args.category_key is None):
        ap.error("exactly one of --category / --category-key is required")
    if not args.source.exists():
        ap.error(f"source {args.source} does not exist")

    seeds: list[SeedPair] = []
    seen: set[tuple[str, str]] = set()
    rejects: list[tuple[str, str]] = []
    duplicates = 0

    for where, record in iter_records(args.source):
        try:
            noun = str(record[args.noun_key]).strip().casefold()
            verb = str(record[args.verb_key]).strip().casefold()
        except KeyError as exc:
            rejects.append((where, f"missing field {exc.args[0]!r}"))
            continue
        if (noun, verb) in seen:
            duplicates += 1
            continue
        category = args.category or str(record.get(args.category_key, "")).strip().casefold()
        if args.sentence_key is not None:
            sentence = str(record.get(args.sentence_key, "")).strip()
        else:
            sentence = args.sentence_template.format(noun=noun, verb=verb)
        try:
            seeds.append(SeedPair(noun=noun, verb=verb, template_sentence=sentence, category=category))
        except MiningError as exc:
            rejects.append((where, str(exc)))
            continue
        seen.add((noun, verb))

    with args.out.open("w", encoding="utf-8") as fh:
        for seed in seeds:
            row = {
                "noun": seed.noun,
                "verb": seed.verb,
                "sentence": seed.template_sentence,
                "category": seed.category,
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    for where, reason in rejects:
        print(f"skipped {where}: {reason}", file=sys.stderr)
    nouns = {seed.noun for seed in seeds}
    verbs = {seed.verb for seed in seeds}
    print(
        f"wrote {len(seeds)} unique pair(s) over {len(nouns)} noun(s) / "
        f"{len(verbs)} verb(s) to {args.out}; "
        f"dropped {duplicates} duplicate(s); skipped {len(rejects)}"
    )
    return 1 if rejects else 0


if __name__ == "__main__":
    raise SystemExit(main())
