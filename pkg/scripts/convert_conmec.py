#!/usr/bin/env python3
"""Convert a ConMeC release into the normalized instance JSONL format.

One-shot converter, not library API. Assumed source layout, remappable
via flags because field names vary between snapshots of the release:

  * a single .json (list of records, or an object mapping category name
    to a list of records), .jsonl, .csv, or .tsv file, or a directory of
    such files where each file covers one category and the category is
    the file stem (container.json, producer.jsonl, ...);
  * each record carries the sentence, the target noun, and a binary
    label; the category comes from a record field, the enclosing JSON
    key, the file stem, or the fixed --category;
  * if the release marks which occurrence of a repeated target word was
    annotated, pass --index-key; otherwise occurrence 0 is assumed, and
    every row where the target repeats is tallied in the summary so the
    assumption can be audited against the release.

Rows that do not validate (missing field, unknown label or category,
target not present as a whole token) are reported with their source
location and skipped; the script still writes the clean rows but exits
nonzero when anything was skipped.

Usage:
  python3 scripts/convert_conmec.py RAW_PATH -o conmec.jsonl
  python3 scripts/convert_conmec.py raw/ -o conmec.jsonl --target-key word
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Iterator

from metonymy.data import (
    CATEGORIES,
    METONYMIC,
    NON_METONYMIC,
    DataError,
    Dataset,
    Instance,
    count_occurrences,
    dataset_stats,
    format_stats,
    write_dataset,
)

SUFFIXES = (".json", ".jsonl", ".csv", ".tsv")


def iter_records(path: Path) -> Iterator[tuple[str, str | None, dict[str, Any]]]:
    """Yield (source location, category hint, record) from one file or a directory."""
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() in SUFFIXES)
        if not files:
            raise SystemExit(f"error: no {'/'.join(SUFFIXES)} files under {path}")
        for child in files:
            yield from iter_records(child)
        return
    hint = path.stem.casefold() if path.stem.casefold() in CATEGORIES else None
    suffix = path.suffix.lower()
    if suffix == ".json":
        data = json.loads(path.read_text(encoding="utf-8"))
        if isinstance(data, dict):
            for key, block in data.items():
                if not isinstance(block, list):
                    raise SystemExit(f"error: {path}: JSON key {key!r} is not a list")
                for i, record in enumerate(block):
                    yield f"{path}[{key}][{i}]", str(key).casefold(), record
        elif isinstance(data, list):
            for i, record in enumerate(data):
                yield f"{path}[{i}]", hint, record
        else:
            raise SystemExit(f"error: {path}: top-level JSON must be a list or object")
    elif suffix == ".jsonl":
        with path.open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise SystemExit(f"error: {path}:{line_no}: {exc}") from exc
                yield f"{path}:{line_no}", hint, record
    elif suffix in (".csv", ".tsv"):
        delim = "\t" if suffix == ".tsv" else ","
        with path.open("r", encoding="utf-8", newline="") as fh:
            for line_no, record in enumerate(csv.DictReader(fh, delimiter=delim), start=2):
                yield f"{path}:{line_no}", hint, record
    else:
        raise SystemExit(f"error: unsupported file type {path}")


def parse_values(raw: str) -> frozenset[str]:
    return frozenset(v.strip().casefold() for v in raw.split(",") if v.strip())


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="release file or directory")
    ap.add_argument("-o", "--out", type=Path, required=True, help="normalized JSONL to write")
    ap.add_argument("--sentence-key", default="sentence")
    ap.add_argument("--target-key", default="word", help="field holding the target noun")
    ap.add_argument("--label-key", default="label")
    ap.add_argument("--category-key", default="category")
    ap.add_argument("--id-key", default=None, help="field holding a stable id (default: synthesized)")
    ap.add_argument("--index-key", default=None, help="field marking the annotated occurrence index")
    ap.add_argument("--category", default=None, choices=CATEGORIES, help="fixed category overriding all hints")
    ap.add_argument(
        "--metonymic-values",
        default="metonymic,met,yes,true,1",
        help="comma-separated label values mapped to metonymic",
    )
    ap.add_argument(
        "--literal-values",
        default="literal,non-metonymic,nonmetonymic,non_metonymic,no,false,0",
        help="comma-separated label values mapped to non-metonymic",
    )
    args = ap.parse_args(argv)

    met_values = parse_values(args.metonymic_values)
    lit_values = parse_values(args.literal_values)
    if met_values & lit_values:
        ap.error(f"label values on both sides: {sorted(met_values & lit_values)}")
    if not args.source.exists():
        ap.error(f"source {args.source} does not exist")

    instances: list[Instance] = []
    rejects: list[tuple[str, str]] = []
    counters: dict[str, int] = {}
    repeated_defaulted = 0

    for where, hint, record in iter_records(args.source):
        if not isinstance(record, dict):
            rejects.append((where, f"record is {type(record).__name__}, not an object"))
            continue
        try:
            sentence = str(record[args.sentence_key])
            target = str(record[args.target_key])
            raw_label = str(record[args.label_key]).strip().casefold()
        except KeyError as exc:
            rejects.append((where, f"missing field {exc.args[0]!r}"))
            continue
        if raw_label in met_values:
            label = METONYMIC
        elif raw_label in lit_values:
            label = NON_METONYMIC
        else:
            rejects.append((where, f"unknown label value {raw_label!r}"))
            continue
        category = args.category or str(record.get(args.category_key) or hint or "").casefold()
        if category not in CATEGORIES:
            rejects.append((where, f"unknown category {category!r}"))
            continue
        occurrence = 0
        if args.index_key is not None:
            try:
                occurrence = int(record[args.index_key])
            except (KeyError, TypeError, ValueError):
                rejects.append((where, f"bad occurrence index in field {args.index_key!r}"))
                continue
        elif count_occurrences(sentence, target) > 1:
            repeated_defaulted += 1
        counters[category] = counters.get(category, 0) + 1
        inst_id = str(record[args.id_key]) if args.id_key else f"{category}-{counters[category]:04d}"
        try:
            instances.append(
                Instance(
                    id=inst_id,
                    sentence=sentence,
                    target=target,
                    target_occurrence=occurrence,
                    category=category,
                    gold=label,
                )
            )
        except (DataError, KeyError) as exc:
            rejects.append((where, str(exc)))

    try:
        dataset = Dataset(name=args.out.stem, instances=instances)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_dataset(dataset, args.out)

    for where, reason in rejects:
        print(f"skipped {where}: {reason}", file=sys.stderr)
    print(format_stats(dataset_stats(dataset)))
    print(f"wrote {len(dataset)} instance(s) to {args.out}; skipped {len(rejects)}")
    if repeated_defaulted:
        print(
            f"note: {repeated_defaulted} row(s) repeat their target; occurrence 0 was "
            "assumed (pass --index-key if the release marks the annotated one)"
        )
    return 1 if rejects else 0


if __name__ == "__main__":
    raise SystemExit(main())
