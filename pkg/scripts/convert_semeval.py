#!/usr/bin/env python3
"""Convert SemEval-2007-style metonymy XML into normalized JSONL.

One-shot converter, not library API. Assumed source layout, remappable
via flags: an XML file whose sample elements each contain running text
with the annotated mention wrapped in a dedicated inner element carrying
the reading attribute, e.g.

  <sample id="s17">
    ... talks between <annot reading="metonymic">Germany</annot> and ...
  </sample>

Reading mapping: values in --literal-values become non-metonymic,
values in --drop-values are dropped outright, and every other reading
(including fine-grained ones such as place-for-people) becomes
metonymic. The reading attribute is looked up on the mention element
first, then on the sample element.

Whitespace in the flattened sample text is collapsed. Multi-token
mentions do not fit the single-token target schema; --multiword picks
the kept token (last or first) or rejects them (the default).

Usage:
  python3 scripts/convert_semeval.py samples.xml -o semeval_norm.jsonl --multiword last
  python3 scripts/convert_semeval.py locations.xml -o out.jsonl --target-tag location
"""

from __future__ import annotations

import argparse
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

from metonymy.data import (
    CATEGORIES,
    METONYMIC,
    NON_METONYMIC,
    DataError,
    Dataset,
    Instance,
    dataset_stats,
    format_stats,
    token_spans,
    write_dataset,
)


def flatten(sample: ET.Element, target_tag: str) -> tuple[str, list[tuple[int, str, ET.Element]]]:
    """Flat text of a sample plus (char offset, mention text, element) per target hit."""
    parts: list[str] = []
    hits: list[tuple[int, str, ET.Element]] = []

    def walk(elem: ET.Element) -> None:
        if elem.tag == target_tag:
            offset = sum(len(p) for p in parts)
            mention = "".join(elem.itertext())
            hits.append((offset, mention, elem))
            parts.append(mention)
        else:
            if elem.text:
                parts.append(elem.text)
            for child in elem:
                walk(child)
        if elem.tail:
            parts.append(elem.tail)

    if sample.text:
        parts.append(sample.text)
    for child in sample:
        walk(child)
    return "".join(parts), hits


def keep_token(
    flat: str, offset: int, mention: str, multiword: str
) -> tuple[str, int] | None:
    """(token, occurrence in flat text) kept from the mention, or None if rejected."""
    spans = token_spans(mention)
    if not spans:
        return None
    if len(spans) > 1:
        if multiword == "first":
            spans = spans[:1]
        elif multiword == "last":
            spans = spans[-1:]
        else:
            return None
    local_start, local_end = spans[0]
    token = mention[local_start:local_end]
    start = offset + local_start
    want = token.casefold()
    seen = 0
    for s, e in token_spans(flat):
        if s == start:
            if flat[s:e].casefold() != want:
                return None
            return token, seen
        if flat[s:e].casefold() == want:
            seen += 1
    return None


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", type=Path, help="release XML file")
    ap.add_argument("-o", "--out", type=Path, required=True, help="normalized JSONL to write")
    ap.add_argument("--sample-tag", default="sample", help="element holding one annotated text")
    ap.add_argument("--target-tag", default="annot", help="inner element wrapping the mention")
    ap.add_argument("--reading-attr", default="reading")
    ap.add_argument("--id-attr", default="id", help="sample attribute holding a stable id")
    ap.add_argument("--category", default="location", choices=CATEGORIES)
    ap.add_argument(
        "--multiword",
        choices=("reject", "last", "first"),
        default="reject",
        help="token kept from a multi-token mention (default: reject the row)",
    )
    ap.add_argument("--literal-values", default="literal")
    ap.add_argument("--drop-values", default="mixed", help="readings dropped outright")
    args = ap.parse_args(argv)

    if not args.source.exists():
        ap.error(f"source {args.source} does not exist")
    lit_values = {v.strip().casefold() for v in args.literal_values.split(",") if v.strip()}
    drop_values = {v.strip().casefold() for v in args.drop_values.split(",") if v.strip()}

    try:
        root = ET.parse(args.source).getroot()
    except ET.ParseError as exc:
        print(f"error: {args.source}: {exc}", file=sys.stderr)
        return 1

    samples = list(root.iter(args.sample_tag))
    if not samples:
        print(f"error: no <{args.sample_tag}> elements in {args.source}", file=sys.stderr)
        return 1

    instances: list[Instance] = []
    rejects: list[tuple[str, str]] = []
    dropped = 0

    for n, sample in enumerate(samples, start=1):
        sample_id = sample.get(args.id_attr) or f"semeval-{n:05d}"
        flat, hits = flatten(sample, args.target_tag)
        if not hits:
            rejects.append((sample_id, f"no <{args.target_tag}> mention"))
            continue
        for k, (offset, mention, elem) in enumerate(hits):
            where = sample_id if len(hits) == 1 else f"{sample_id}#{k + 1}"
            reading = (elem.get(args.reading_attr) or sample.get(args.reading_attr) or "").casefold()
            if not reading:
                rejects.append((where, f"no {args.reading_attr!r} attribute"))
                continue
            if reading in drop_values:
                dropped += 1
                continue
            label = NON_METONYMIC if reading in lit_values else METONYMIC
            picked = keep_token(flat, offset, mention, args.multiword)
            if picked is None:
                rejects.append((where, f"mention {mention!r} kept no single token"))
                continue
            token, occurrence = picked
            sentence = " ".join(flat.split())
            try:
                instances.append(
                    Instance(
                        id=where,
                        sentence=sentence,
                        target=token,
                        target_occurrence=occurrence,
                        category=args.category,
                        gold=label,
                    )
                )
            except DataError as exc:
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
        f"wrote {len(dataset)} instance(s) to {args.out} "
        f"from {len(samples)} sample(s); dropped {dropped}; skipped {len(rejects)}"
    )
    return 1 if rejects else 0


if __name__ == "__main__":
    raise SystemExit(main())
