"""Corpus mining: grow a (noun, verb) pair lexicon with LLM augmentation, scan
dependency-parsed text for sentences realizing a pair, and sample the hits
uniformly by noun.

A candidate sentence is kept when some NOUN token and some VERB token whose
lemmas form a lexicon pair are linked by a direct dependency edge in either
direction.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .backend import Backend, ChatRequest
from .data import CATEGORIES, DataError, Dataset, Instance, locate_target

log = logging.getLogger(__name__)

# CoNLL-U column layout.
ID, FORM, LEMMA, UPOS, XPOS, FEATS, HEAD, DEPREL, DEPS, MISC = range(10)

PROVENANCES = ("seed", "augmented")

# Repo-authored augmentation prompt wording; not part of any fixed contract.
NOUN_PROMPT = (
    'Here is a sentence: "{sentence}"\n'
    'The noun "{noun}" is used with the verb "{verb}". '
    'Give {k} other nouns that could replace "{noun}" in this sentence '
    "and be used in the same way. Answer with exactly {k} lowercase nouns "
    "in their dictionary form, separated by commas, and nothing else."
)
VERB_PROMPT = (
    'Here is a sentence: "{sentence}"\n'
    'Give {k} other verbs that are commonly used with the noun "{noun}" '
    "in the same way as in this sentence. Answer with exactly {k} lowercase "
    "verbs in their dictionary form, separated by commas, and nothing else."
)

_LEMMA_RE = re.compile(r"^[a-z]+(?:-[a-z]+)*$")


class MiningError(ValueError):
    """Raised for invalid seeds, lexicon rows, or sampler arguments."""


@dataclass(frozen=True)
class SeedPair:
    """A manually curated (noun, verb) pair with a template sentence."""

    noun: str
    verb: str
    template_sentence: str
    category: str

    def __post_init__(self) -> None:
        if not self.noun or not self.verb:
            raise MiningError("seed noun and verb must be non-empty")
        if self.category not in CATEGORIES:
            raise MiningError(f"unknown seed category {self.category!r}")
        if not self.template_sentence:
            raise MiningError(f"seed ({self.noun}, {self.verb}) has no template sentence")

    def key(self) -> tuple[str, str, str]:
        return (self.noun, self.verb, self.category)


@dataclass(frozen=True)
class LexiconEntry:
    noun: str
    verb: str
    category: str
    provenance: str = "seed"

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise MiningError(f"unknown category {self.category!r}")
        if self.provenance not in PROVENANCES:
            raise MiningError(f"unknown provenance {self.provenance!r}")

    def key(self) -> tuple[str, str, str]:
        return (self.noun, self.verb, self.category)


class PairLexicon:
    """Ordered, deduplicated (noun, verb, category) entries.

    Re-adding an existing triple keeps the first entry, except that seed
    provenance upgrades an augmented one.
    """

    def __init__(self, entries: Iterable[LexiconEntry] = ()) -> None:
        self.entries: list[LexiconEntry] = []
        self._index: dict[tuple[str, str, str], int] = {}
        for entry in entries:
            self.add(entry)

    def add(self, entry: LexiconEntry) -> bool:
        pos = self._index.get(entry.key())
        if pos is not None:
            if entry.provenance == "seed" and self.entries[pos].provenance != "seed":
                self.entries[pos] = entry
            return False
        self._index[entry.key()] = len(self.entries)
        self.entries.append(entry)
        return True

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[LexiconEntry]:
        return iter(self.entries)

    def nouns(self) -> set[str]:
        return {e.noun for e in self.entries}

    def verbs(self) -> set[str]:
        return {e.verb for e in self.entries}

    def pair_categories(self) -> dict[tuple[str, str], list[str]]:
        """(noun, verb) -> categories in entry order."""
        out: dict[tuple[str, str], list[str]] = {}
        for e in self.entries:
            out.setdefault((e.noun, e.verb), []).append(e.category)
        return out

    def write(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            for e in self.entries:
                row = {
                    "noun": e.noun,
                    "verb": e.verb,
                    "category": e.category,
                    "provenance": e.provenance,
                }
                fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    @classmethod
    def read(cls, path: str | Path) -> "PairLexicon":
        lex = cls()
        with Path(path).open("r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    lex.add(
                        LexiconEntry(
                            noun=row["noun"],
                            verb=row["verb"],
                            category=row["category"],
                            provenance=row.get("provenance", "seed"),
                        )
                    )
                except (ValueError, KeyError) as exc:
                    raise MiningError(f"{path}:{line_no}: bad lexicon row: {exc}") from exc
        return lex


def read_seeds(path: str | Path) -> list[SeedPair]:
    seeds: list[SeedPair] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                seeds.append(
                    SeedPair(
                        noun=row["noun"],
                        verb=row["verb"],
                        template_sentence=row["sentence"],
                        category=row["category"],
                    )
                )
            except (ValueError, KeyError) as exc:
                raise MiningError(f"{path}:{line_no}: bad seed row: {exc}") from exc
    return seeds


def parse_lemma_list(text: str, k: int, exclude: Iterable[str] = ()) -> list[str]:
    """Pull up to ``k`` distinct single-word lowercase lemmas out of a completion."""
    excluded = {e.casefold() for e in exclude}
    out: list[str] = []
    for chunk in re.split(r"[,\n;]+", text):
        word = re.sub(r"^\s*\d+[.)]?\s*", "", chunk)  # drop list numbering
        word = word.strip().strip("\"'.`*()[]!?:").strip().casefold()
        if not _LEMMA_RE.match(word):
            continue
        if word in excluded or word in out:
            continue
        out.append(word)
        if len(out) == k:
            break
    return out


@dataclass
class Augmenter:
    """Asks the backend for replacement nouns and associated verbs."""

    backend: Backend
    model: str
    temperature: float = 0.6
    top_p: float = 0.9
    max_tokens: int = 64

    def _ask(self, prompt: str) -> str:
        request = ChatRequest(
            model=self.model,
            messages=(("user", prompt),),
            temperature=self.temperature,
            top_p=self.top_p,
            max_tokens=self.max_tokens,
        )
        return self.backend.complete(request).text

    def augment_nouns(self, seed: SeedPair, k: int = 3) -> list[str]:
        """Up to ``k`` distinct replacement nouns, never the seed noun itself."""
        prompt = NOUN_PROMPT.format(sentence=seed.template_sentence, noun=seed.noun, verb=seed.verb, k=k)
        nouns = parse_lemma_list(self._ask(prompt), k, exclude=(seed.noun,))
        if not nouns:
            log.warning("no nouns parsed for seed (%s, %s)", seed.noun, seed.verb)
        return nouns

    def augment_verbs(
        self, sentence: str, noun: str, k: int = 3, exclude: str | None = None
    ) -> list[str]:
        """Up to ``k`` distinct verbs for ``noun`` in ``sentence``; the original
        verb is filtered out when given."""
        prompt = VERB_PROMPT.format(sentence=sentence, noun=noun, k=k)
        excluded = (exclude,) if exclude else ()
        verbs = parse_lemma_list(self._ask(prompt), k, exclude=excluded)
        if not verbs:
            log.warning("no verbs parsed for noun %r", noun)
        return verbs


def swap_noun(sentence: str, old: str, new: str) -> str:
    """Replace the first whole-token occurrence of ``old`` with ``new``."""
    start, end = locate_target(sentence, old, 0)
    return sentence[:start] + new + sentence[end:]


def build_pair_lexicon(
    seeds: Iterable[SeedPair],
    augmenter: Augmenter | None = None,
    k: int = 3,
    checkpoint: str | Path | None = None,
) -> PairLexicon:
    """Seeds plus, per seed, the cross-product of its augmented nouns with the
    seed verb and all augmented verbs.

    Without an augmenter the lexicon is exactly the seeds. A checkpoint file
    records each finished seed so an interrupted build resumes past it.
    """
    seeds = list(seeds)
    lexicon = PairLexicon()
    for seed in seeds:
        lexicon.add(LexiconEntry(seed.noun, seed.verb, seed.category, "seed"))
    if augmenter is None:
        return lexicon

    done: dict[tuple[str, str, str], list[tuple[str, str, str]]] = {}
    checkpoint = Path(checkpoint) if checkpoint is not None else None
    if checkpoint is not None and checkpoint.exists():
        with checkpoint.open("r", encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                done[tuple(row["seed"])] = [tuple(p) for p in row["pairs"]]

    for seed in seeds:
        if seed.key() in done:
            pairs = done[seed.key()]
        else:
            nouns = augmenter.augment_nouns(seed, k)
            verbs: list[str] = []
            for noun in nouns:
                try:
                    sentence = swap_noun(seed.template_sentence, seed.noun, noun)
                except DataError:
                    log.warning(
                        "seed noun %r not found in its template sentence, using it as-is",
                        seed.noun,
                    )
                    sentence = seed.template_sentence
                for verb in augmenter.augment_verbs(sentence, noun, k, exclude=seed.verb):
                    if verb not in verbs:
                        verbs.append(verb)
            pairs = [
                (noun, verb, seed.category) for noun in nouns for verb in [seed.verb] + verbs
            ]
            if checkpoint is not None:
                with checkpoint.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"seed": list(seed.key()), "pairs": pairs}) + "\n")
        for noun, verb, category in pairs:
            lexicon.add(LexiconEntry(noun, verb, category, "augmented"))
    return lexicon


@dataclass(frozen=True)
class Token:
    index: int  # 1-based within the sentence
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str


@dataclass(frozen=True)
class ConlluSentence:
    source_id: str
    text: str
    tokens: tuple[Token, ...]


def read_conllu(path: str | Path) -> Iterator[ConlluSentence]:
    """Yield sentences from a CoNLL-U file.

    Multiword-token ranges and empty nodes are skipped inside a block; a block
    with a malformed line is skipped whole, warning with the line number.
    """
    path = Path(path)
    tokens: list[Token] = []
    sent_id: str | None = None
    text: str | None = None
    block_index = 0
    bad = False

    def finish() -> ConlluSentence | None:
        nonlocal tokens, sent_id, text, block_index, bad
        out = None
        if tokens and not bad:
            source = sent_id or f"{path.name}:{block_index}"
            out = ConlluSentence(
                source_id=source,
                text=text or " ".join(t.form for t in tokens),
                tokens=tuple(tokens),
            )
        if tokens or bad:
            block_index += 1
        tokens, sent_id, text, bad = [], None, None, False
        return out

    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                sentence = finish()
                if sentence is not None:
                    yield sentence
                continue
            if line.startswith("#"):
                comment = line[1:].strip()
                if comment.startswith("sent_id"):
                    _, _, value = comment.partition("=")
                    sent_id = value.strip() or None
                elif comment.startswith("text"):
                    _, _, value = comment.partition("=")
                    text = value.strip() or None
                continue
            if bad:
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                log.warning("%s:%d: malformed line (%d columns), skipping block", path, line_no, len(cols))
                bad = True
                continue
            if "-" in cols[ID] or "." in cols[ID]:
                continue  # multiword-token range or empty node
            try:
                index = int(cols[ID])
                head = int(cols[HEAD]) if cols[HEAD] != "_" else 0
            except ValueError:
                log.warning("%s:%d: malformed indices, skipping block", path, line_no)
                bad = True
                continue
            tokens.append(
                Token(
                    index=index,
                    form=cols[FORM],
                    lemma=cols[LEMMA],
                    upos=cols[UPOS],
                    head=head,
                    deprel=cols[DEPREL],
                )
            )
    sentence = finish()
    if sentence is not None:
        yield sentence


@dataclass(frozen=True)
class CandidateSentence:
    """A sentence realizing a lexicon pair through a direct dependency edge."""

    sentence: str
    noun_index: int
    verb_index: int
    relation: str
    noun: str
    verb: str
    category: str
    source_id: str
    noun_form: str = ""

    def to_row(self, row_id: str) -> dict[str, Any]:
        form = self.noun_form or self.noun
        return {
            "id": row_id,
            "sentence": self.sentence,
            "target": form,
            "target_index": 0,
            "category": self.category,
            "label": None,
            "verb": self.verb,
            "relation": self.relation,
            "source": self.source_id,
        }


def _edge(noun: Token, verb: Token) -> str | None:
    """deprel of the dependent when the two tokens share a direct edge."""
    if noun.head == verb.index:
        return noun.deprel
    if verb.head == noun.index:
        return verb.deprel
    return None


@dataclass(frozen=True)
class _LexiconIndex:
    pair_cats: dict[tuple[str, str], list[str]]
    nouns: set[str]
    verbs: set[str]

    @classmethod
    def build(cls, lexicon: PairLexicon) -> "_LexiconIndex":
        return cls(lexicon.pair_categories(), lexicon.nouns(), lexicon.verbs())


def scan_sentence(
    sentence: ConlluSentence, lexicon: PairLexicon, _index: _LexiconIndex | None = None
) -> list[CandidateSentence]:
    index = _index or _LexiconIndex.build(lexicon)
    pair_cats, nouns, verbs = index.pair_cats, index.nouns, index.verbs
    noun_tokens = [t for t in sentence.tokens if t.upos == "NOUN" and t.lemma.casefold() in nouns]
    verb_tokens = [t for t in sentence.tokens if t.upos == "VERB" and t.lemma.casefold() in verbs]
    # first matching token pair per lexicon pair, in (noun_index, verb_index) order
    matched: dict[tuple[str, str], tuple[Token, Token, str]] = {}
    for nt in noun_tokens:
        for vt in verb_tokens:
            pair = (nt.lemma.casefold(), vt.lemma.casefold())
            if pair not in pair_cats or pair in matched:
                continue
            relation = _edge(nt, vt)
            if relation is not None:
                matched[pair] = (nt, vt, relation)
    out: list[CandidateSentence] = []
    for pair, (nt, vt, relation) in matched.items():
        for category in pair_cats[pair]:
            out.append(
                CandidateSentence(
                    sentence=sentence.text,
                    noun_index=nt.index,
                    verb_index=vt.index,
                    relation=relation,
                    noun=pair[0],
                    verb=pair[1],
                    category=category,
                    source_id=sentence.source_id,
                    noun_form=nt.form,
                )
            )
    out.sort(key=lambda c: (c.noun_index, c.verb_index, CATEGORIES.index(c.category), c.noun, c.verb))
    return out


def scan_conllu(paths: Iterable[str | Path], lexicon: PairLexicon) -> Iterator[CandidateSentence]:
    index = _LexiconIndex.build(lexicon)
    for path in paths:
        for sentence in read_conllu(path):
            yield from scan_sentence(sentence, lexicon, index)


@dataclass
class MiningStats:
    sentences: int = 0
    candidates: int = 0
    nouns: set[str] = field(default_factory=set)
    verbs: set[str] = field(default_factory=set)
    pairs: set[tuple[str, str]] = field(default_factory=set)
    per_category: dict[str, int] = field(default_factory=dict)

    def record(self, candidate: CandidateSentence) -> None:
        self.candidates += 1
        self.nouns.add(candidate.noun)
        self.verbs.add(candidate.verb)
        self.pairs.add((candidate.noun, candidate.verb))
        self.per_category[candidate.category] = self.per_category.get(candidate.category, 0) + 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "sentences_scanned": self.sentences,
            "candidates": self.candidates,
            "unique_nouns": len(self.nouns),
            "unique_verbs": len(self.verbs),
            "unique_pairs": len(self.pairs),
            "per_category": dict(sorted(self.per_category.items())),
        }


def candidates_to_dataset(
    candidates: Iterable[CandidateSentence], name: str = "candidates"
) -> Dataset:
    """Normalized rows, one per candidate; rows failing validation are dropped
    with a warning (the target form must really occur in the sentence text)."""
    instances: list[Instance] = []
    seen_ids: set[str] = set()
    for i, cand in enumerate(candidates):
        row_id = f"{cand.source_id}#{cand.noun}-{cand.verb}-{cand.category}"
        if row_id in seen_ids:
            row_id = f"{row_id}#{i}"
        seen_ids.add(row_id)
        row = cand.to_row(row_id)
        try:
            instances.append(Instance.from_row(row))
        except DataError as exc:
            log.warning("dropping candidate %s: %s", row_id, exc)
    return Dataset(name=name, instances=instances)


def round_robin_sample(items: list, key, n: int, seed: int) -> list:
    """Group ``items`` by ``key`` and take one per group per round: group order
    reshuffled each round, within-group pools shuffled once. Deterministic in
    seed; when every group is deep enough, group counts differ by at most one."""
    if n < 0:
        raise MiningError(f"sample size must be >= 0, got {n}")
    rng = random.Random(seed)
    pools: dict[str, list] = {}
    for item in items:
        pools.setdefault(key(item), []).append(item)
    for pool in pools.values():
        rng.shuffle(pool)
    want = min(n, len(items))
    out: list = []
    while len(out) < want:
        groups = [g for g, pool in pools.items() if pool]
        rng.shuffle(groups)
        for group in groups:
            if len(out) == want:
                break
            out.append(pools[group].pop())
    return out


def sample_uniform(
    candidates: list[CandidateSentence], n: int, seed: int
) -> list[CandidateSentence]:
    """Uniform-by-noun sample of mined candidates."""
    return round_robin_sample(candidates, lambda c: c.noun, n, seed)
