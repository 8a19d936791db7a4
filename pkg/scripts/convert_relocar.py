#!/usr/bin/env python3
"""Convert a ReLocaR-style location-metonymy release into normalized JSONL.

One-shot converter, not library API. Assumed source layout, remappable
via flags: JSONL/CSV/TSV records carrying a sentence, a location
mention, and a reading in {literal, metonymic, mixed}. Every instance
is written with category "location". Mixed readings do not fit the
binary label; they are dropped and tallied.

The mention may be given as text (--target-key) or as character offsets
(--start-key/--end-key), from which the kept token and its occurrence
index are computed. Multi-token mentions ("New York") do not fit the
single-token target schema; --multiword picks which token to keep
(last, usually the syntactic head of an English place name, or first)
or rejects them (the default, so the narrowing is always explicit).

Usage:
  python3 scripts/convert_relocar.py relocar.jsonl -o relocar_norm.jsonl --multiword last
  python3 scripts/convert_relocar.py relocar.tsv -o out.jsonl --start-key begin --end-key end
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Any, Iterator

from metonymy.data import (
    METONYMIC,
    NON_METONYMIC,
    DataError,
    Dataset,
    Instance,
    count_occurrences,
    dataset_stats,
    format_stats,
    token_spans,
    write_dataset,
)

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


def pick_token(mention: str, multiword: str) -> str | None:
    """The single token kept from a mention, or None when policy forbids it."""
    words = [mention[s:e] for s, e in token_spans(mention)]
    if not words:
        return None
    if len(words) == 1:
        return words[0]
    if multiword == "first":
        return words[0]
    if multiword == "last":
        return words[-1]
    return None


def occurrence_at(sentence: str, char_start: int, token: str) -> int:
    """Occurrence index of the token that starts exactly at char_start."""
    want = token.casefold()
    seen = 0
    for start, end in token_spans(sentence):
        if start == char_start:
            if sentence[start:end].casefold() != want:
                break
            return seen
        if sentence[start:end].casefold() == want:
            seen += 1
    raise ValueError(f"offset {char_start} is not the start of token {token!r}")


def token_from_span(
    sentence: str, start: int, end: int, multiword: str
) -> tuple[str, int] | None:
    """(token, occurrence) for the mention at [start, end), or None if rejected."""
    overlapping = [
        (s, e) for s, e in token_spans(sentence) if s < end and e > start
    ]
    if not overlapping:
        return None
    if len(overlapping) > 1:
        if multiword == "first":
            overlapping = overlapping[:1]
        elif multiword == "last":
            overlapping = overlapping[-1:]
        else:
            return None
    s, e = overlapping[0]
    token = sentence[s:e]
    return token, occurrence_at(sentence, s, token)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="release file (.jsonl/.csv/.tsv)")
    ap.add_argument("-o", "--out", type=Path, required=True, help="normalized JSONL to write")
    ap.add_argument("--sentence-key", default="sentence")
    ap.add_argument("--target-key", default="target", help="field holding the mention text")
    ap.add_argument("--reading-key", default="reading")
    ap.add_argument("--id-key", default=None, help="field holding a stable id (default: synthesized)")
    ap.add_argument("--start-key", default=None, help="field with the mention's start char offset")
    ap.add_argument("--end-key", default=None, help="field with the mention's end char offset")
    ap.add_argument("--category", default="location", help="category stamped on every instance")
    ap.add_argument(
        "--multiword",
        choices=("reject", "last", "first"),
        default="reject",
        help="token kept from a multi-token mention (default: reject the row)",
    )
    ap.add_argument("--metonymic-values", default="metonymic")
    ap.add_argument("--literal-values", default="literal")
    ap.add_argument("--drop-values", default="mixed", help="readings dropped outright")
    args = ap.parse_args(argv)

    if (args.start_key is None) != (args.end_key is None):
        ap.error("--start-key and --end-key must be given together")
    if not args.source.exists():
        ap.error(f"source {args.source} does not exist")
    met_values = {v.strip().casefold() for v in args.metonymic_values.split(",") if v.strip()}
    lit_values = {v.strip().casefold() for v in args.literal_values.split(",") if v.strip()}
    drop_values = {v.strip().casefold() for v in args.drop_values.split(",") if v.strip()}

    instances: list[Instance] = []
    rejects: list[tuple[str, str]] = []
    dropped_mixed = 0
    repeated_defaulted = 0
    counter = 0

    for where, record in iter_records(args.source):
        try:
            sentence = str(record[args.sentence_key])
            reading = str(record[args.reading_key]).strip().casefold()
        except KeyError as exc:
            rejects.append((where, f"missing field {exc.args[0]!r}"))
            continue
        if reading in drop_values:
            dropped_mixed += 1
            continue
        if reading in met_values:
            label = METONYMIC
        elif reading in lit_values:
            label = NON_METONYMIC
        else:
            rejects.append((where, f"unknown reading {reading!r}"))
            continue

        if args.start_key is not None:
            try:
                start = int(record[args.start_key])
                end = int(record[args.end_key])
            except (KeyError, TypeError, ValueError):
                rejects.append((where, "bad or missing mention offsets"))
                continue
            try:
                picked = token_from_span(sentence, start, end, args.multiword)
            except ValueError as exc:
                rejects.append((where, str(exc)))
                continue
            if picked is None:
                rejects.append((where, f"mention at {start}:{end} kept no single token"))
                continue
            target, occurrence = picked
        else:
            try:
                mention = str(record[args.target_key])
            except KeyError as exc:
                rejects.append((where, f"missing field {exc.args[0]!r}"))
                continue
            token = pick_token(mention, args.multiword)
            if token is None:
                rejects.append((where, f"mention {mention!r} kept no single token"))
                continue
            target, occurrence = token, 0
            if count_occurrences(sentence, token) > 1:
                repeated_defaulted += 1

        counter += 1
        inst_id = str(record[args.id_key]) if args.id_key else f"relocar-{counter:05d}"
        try:
            instances.append(
                Instance(
                    id=inst_id,
                    sentence=sentence,
                    target=target,
                    target_occurrence=occurrence,
                    category=args.category,
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
    print(
        f"wrote {len(dataset)} instance(s) to {args.out}; "
        f"dropped {dropped_mixed} mixed reading(s); skipped {len(rejects)}"
    )
    if repeated_defaulted:
        print(
            f"note: {repeated_defaulted} row(s) repeat their target; occurrence 0 was "
            "assumed (pass --start-key/--end-key if the release carries offsets)"
        )
    return 1 if rejects else 0


if __name__ == "__main__":
    raise SystemExit(main())
