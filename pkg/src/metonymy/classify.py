"""Prompting strategies for metonymy resolution.

Three strategies share one backend abstraction: a basic yes/no prompt, a
one-step chain-of-thought prompt, and a two-step variant that first routes the
target noun to a semantic category and then applies a category-specific
reasoning prompt. Self-consistency majority voting repeats a strategy with
distinct vote indexes. ``run_batch`` drives a dataset through a strategy with
resumption, bounded concurrency, and deterministic output order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import string
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable

from .backend import Backend, ChatRequest, ChatResponse
from .data import (
    Dataset,
    Instance,
    LoadError,
    METONYMIC,
    NON_METONYMIC,
    Prediction,
    PredictionError,
    SEMANTIC_CATEGORIES,
    VoteRecord,
)

log = logging.getLogger(__name__)

PROMPT_NAMES = (
    "basic",
    "cot_general",
    "categorize",
    "cot2s_container",
    "cot2s_producer",
    "cot2s_product",
    "cot2s_location",
    "cot2s_general",
)

GENERAL = "general"

# Placeholders a template may use; anything else is an error at render time.
_ALLOWED_PLACEHOLDERS = {"sentence", "target", "context_before", "context_after"}

_CATEGORY_RE = re.compile(r"\b(container|producer|product|location|general)\b", re.IGNORECASE)
_MARKER_RE = re.compile(r"final\s*answer\s*:\s*[\"'*_\s]*(metonymic|literal)", re.IGNORECASE)

_CATEGORIZE_RETRY_NUDGE = (
    "Answer with exactly one word: CONTAINER, PRODUCER, PRODUCT, LOCATION, or GENERAL."
)


class PromptError(ValueError):
    """Raised for missing prompt files or unbound placeholders."""


class RunnerError(RuntimeError):
    """Raised for unrecoverable batch-runner problems."""


class PromptLibrary:
    """The eight named prompt templates, from the package or a directory."""

    def __init__(self, texts: dict[str, str]) -> None:
        missing = [name for name in PROMPT_NAMES if name not in texts]
        if missing:
            raise PromptError(f"missing prompt template(s): {', '.join(missing)}")
        self.texts = dict(texts)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> "PromptLibrary":
        texts: dict[str, str] = {}
        if directory is None:
            root = resources.files("metonymy").joinpath("prompts")
            for name in PROMPT_NAMES:
                res = root.joinpath(f"{name}.txt")
                if not res.is_file():
                    raise PromptError(f"packaged prompt {name}.txt not found")
                texts[name] = res.read_text(encoding="utf-8")
        else:
            directory = Path(directory)
            for name in PROMPT_NAMES:
                path = directory / f"{name}.txt"
                if not path.is_file():
                    raise PromptError(f"prompt file not found: {path}")
                texts[name] = path.read_text(encoding="utf-8")
        return cls(texts)

    def text(self, name: str) -> str:
        if name not in self.texts:
            raise PromptError(f"unknown prompt template {name!r}")
        return self.texts[name]

    def hashes(self) -> dict[str, str]:
        return {
            name: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for name, text in sorted(self.texts.items())
        }


def render_prompt(template: str, instance: Instance, with_context: bool = False) -> str:
    """Fill a template's placeholders from an instance.

    With context requested, surrounding sentences are concatenated into the
    ``{sentence}`` slot and a line naming the target sentence is appended,
    unless the template binds ``{context_before}``/``{context_after}`` itself.
    Missing context fields downgrade to a plain render with a warning.
    """
    fields: set[str] = set()
    for _, name, _, _ in string.Formatter().parse(template):
        if name is not None:
            if name not in _ALLOWED_PLACEHOLDERS:
                raise PromptError(f"unbound placeholder {{{name}}} in template")
            fields.add(name)

    before = instance.context_before or ""
    after = instance.context_after or ""
    has_context = bool(before or after)
    if with_context and not has_context:
        log.warning("%s: context requested but instance has none", instance.id)

    explicit_context = "context_before" in fields or "context_after" in fields
    bindings = {
        "sentence": instance.sentence,
        "target": instance.target,
        "context_before": before,
        "context_after": after,
    }
    if with_context and has_context and not explicit_context:
        bindings["sentence"] = " ".join(part for part in (before, instance.sentence, after) if part)
        rendered = template.format(**bindings)
        return rendered.rstrip("\n") + f'\nThe target sentence is: "{instance.sentence}"\n'
    return template.format(**bindings)


def parse_category(text: str) -> str | None:
    """Scan for the five category words; nearest the end wins; None if absent."""
    last: dict[str, int] = {}
    for m in _CATEGORY_RE.finditer(text):
        last[m.group(1).lower()] = m.end()
    if not last:
        return None
    return max(last.items(), key=lambda kv: kv[1])[0]


def parse_label(text: str) -> tuple[str, bool] | None:
    """Extract the final metonymic/literal call from a completion.

    A "Final answer:" marker decides outright. Otherwise the last occurrence
    of "metonymic" or "literal" anywhere in the text decides, flagged as a
    fallback. Returns None when neither word appears at all.
    """
    markers = _MARKER_RE.findall(text)
    if markers:
        word = markers[-1].lower()
        return (METONYMIC if word == "metonymic" else NON_METONYMIC, False)
    lower = text.lower()
    pos_met = lower.rfind("metonymic")
    pos_lit = lower.rfind("literal")
    if pos_met == -1 and pos_lit == -1:
        return None
    return (METONYMIC if pos_met > pos_lit else NON_METONYMIC, True)


@dataclass(frozen=True)
class SamplingParams:
    """Decoding settings per step kind."""

    categorize_temperature: float = 0.4
    cot_temperature: float = 0.6
    top_p: float = 0.9
    cot_max_tokens: int = 1024
    categorize_max_tokens: int = 64


@dataclass(frozen=True)
class StepTrace:
    """One backend call made on behalf of an instance, plus its parsed result."""

    instance_id: str
    vote_index: int
    step: str  # "categorize" | "classify"
    request: ChatRequest
    response: ChatResponse
    parsed: str

    def to_row(self) -> dict[str, Any]:
        # latency is wall-clock noise; leaving it out keeps replays byte-identical
        return {
            "id": self.instance_id,
            "vote_index": self.vote_index,
            "step": self.step,
            "request": self.request.to_dict(),
            "response": {
                "text": self.response.text,
                "truncated": self.response.truncated,
                "source": self.response.source,
            },
            "parsed": self.parsed,
        }


@dataclass(frozen=True)
class VoteOutcome:
    vote: VoteRecord
    traces: tuple[StepTrace, ...]
    parse_failed: bool
    fallback_used: bool


@dataclass
class Classifier:
    """Binds a backend, model name, prompt set, and sampling params."""

    backend: Backend
    model: str
    prompts: PromptLibrary = field(default_factory=PromptLibrary.load)
    params: SamplingParams = field(default_factory=SamplingParams)
    with_context: bool = False

    def _complete(
        self,
        instance: Instance,
        template_name: str,
        temperature: float,
        max_tokens: int,
        vote_index: int,
        extra_turns: tuple[tuple[str, str], ...] = (),
    ) -> tuple[ChatRequest, ChatResponse]:
        prompt = render_prompt(self.prompts.text(template_name), instance, self.with_context)
        request = ChatRequest(
            model=self.model,
            messages=(("user", prompt),) + extra_turns,
            temperature=temperature,
            top_p=self.params.top_p,
            max_tokens=max_tokens,
            vote_index=vote_index,
        )
        return request, self.backend.complete(request)

    def categorize(self, instance: Instance, vote_index: int) -> tuple[str, list[StepTrace]]:
        """Step 1 of the two-step strategy; unparsable output retries once, then GENERAL."""
        request, response = self._complete(
            instance,
            "categorize",
            self.params.categorize_temperature,
            self.params.categorize_max_tokens,
            vote_index,
        )
        category = parse_category(response.text)
        traces = [
            StepTrace(instance.id, vote_index, "categorize", request, response, category or "")
        ]
        if category is None:
            # a retry must not share the first attempt's cache identity, so it
            # appends the failed turn plus a terse clarifier
            extra = (("assistant", response.text), ("user", _CATEGORIZE_RETRY_NUDGE))
            request, response = self._complete(
                instance,
                "categorize",
                self.params.categorize_temperature,
                self.params.categorize_max_tokens,
                vote_index,
                extra_turns=extra,
            )
            category = parse_category(response.text)
            traces.append(
                StepTrace(
                    instance.id, vote_index, "categorize", request, response, category or ""
                )
            )
        if category is None:
            log.warning("%s: category unparsable twice, falling back to general", instance.id)
            category = GENERAL
        return category, traces

    def _classify_step(
        self, instance: Instance, template_name: str, vote_index: int, category: str | None
    ) -> VoteOutcome:
        request, response = self._complete(
            instance,
            template_name,
            self.params.cot_temperature,
            self.params.cot_max_tokens,
            vote_index,
        )
        parsed = parse_label(response.text)
        if parsed is None:
            label, fallback, failed = NON_METONYMIC, False, True
            log.warning("%s: vote %d unparsable, defaulting", instance.id, vote_index)
        else:
            (label, fallback), failed = parsed, False
        trace = StepTrace(
            instance.id, vote_index, "classify", request, response, label if not failed else ""
        )
        vote = VoteRecord(label=label, category=category, trace_ref=f"{instance.id}:{vote_index}")
        return VoteOutcome(vote, (trace,), parse_failed=failed, fallback_used=fallback)

    def classify_basic(self, instance: Instance, vote_index: int = 0) -> VoteOutcome:
        return self._classify_step(instance, "basic", vote_index, None)

    def classify_cot(self, instance: Instance, vote_index: int = 0) -> VoteOutcome:
        return self._classify_step(instance, "cot_general", vote_index, None)

    def classify_cot2s(self, instance: Instance, vote_index: int = 0) -> VoteOutcome:
        category, cat_traces = self.categorize(instance, vote_index)
        outcome = self._classify_step(instance, f"cot2s_{category}", vote_index, category)
        return VoteOutcome(
            outcome.vote,
            tuple(cat_traces) + outcome.traces,
            outcome.parse_failed,
            outcome.fallback_used,
        )

    def vote(self, instance: Instance, strategy: str, vote_index: int = 0) -> VoteOutcome:
        if strategy == "basic":
            return self.classify_basic(instance, vote_index)
        if strategy == "cot":
            return self.classify_cot(instance, vote_index)
        if strategy == "cot2s":
            return self.classify_cot2s(instance, vote_index)
        raise ValueError(f"unknown strategy {strategy!r}")

    def self_consistency(
        self, instance: Instance, strategy: str, n_votes: int = 1
    ) -> tuple[Prediction, list[StepTrace]]:
        """Run ``n_votes`` independent votes and take the strict majority."""
        if n_votes < 1 or n_votes % 2 == 0:
            raise PredictionError(f"vote count must be odd and positive, got {n_votes}")
        votes: list[VoteRecord] = []
        traces: list[StepTrace] = []
        failures = 0
        for vote_index in range(n_votes):
            outcome = self.vote(instance, strategy, vote_index)
            votes.append(outcome.vote)
            traces.extend(outcome.traces)
            if outcome.parse_failed:
                failures += 1
        prediction = Prediction.from_votes(instance.id, strategy, votes, failures)
        return prediction, traces


@dataclass
class RunResult:
    completed: int = 0
    skipped: int = 0
    failed: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def _read_existing(out_path: Path) -> list[Prediction]:
    """Tolerant resume read: a corrupt final line (crash artifact) is dropped
    and truncated away; corruption anywhere else is a hard error."""
    rows: list[Prediction] = []
    with out_path.open("rb") as fh:
        raw = fh.read()
    offset = 0
    lines = raw.split(b"\n")
    for idx, blob in enumerate(lines):
        line_no = idx + 1
        end = offset + len(blob) + 1  # +1 for the newline
        if blob.strip():
            try:
                rows.append(Prediction.from_row(json.loads(blob.decode("utf-8"))))
            except (ValueError, PredictionError, UnicodeDecodeError) as exc:
                rest = b"".join(lines[idx + 1 :]).strip()
                if rest:
                    raise LoadError(out_path, line_no, str(exc))
                log.warning("%s:%d: dropping corrupt trailing line", out_path, line_no)
                with out_path.open("r+b") as fh:
                    fh.truncate(offset)
                return rows
        offset = end
    return rows


def run_manifest(
    dataset: Dataset,
    classifier: Classifier,
    strategy: str,
    n_votes: int,
    *,
    seed: int | None = None,
    concurrency: int = 1,
) -> dict[str, Any]:
    return {
        "dataset": dataset.name,
        "instances": len(dataset),
        "strategy": strategy,
        "n_votes": n_votes,
        "model": classifier.model,
        "with_context": classifier.with_context,
        "sampling": {
            "categorize_temperature": classifier.params.categorize_temperature,
            "cot_temperature": classifier.params.cot_temperature,
            "top_p": classifier.params.top_p,
            "cot_max_tokens": classifier.params.cot_max_tokens,
            "categorize_max_tokens": classifier.params.categorize_max_tokens,
        },
        "prompt_hashes": classifier.prompts.hashes(),
        "seed": seed,
        "concurrency": concurrency,
    }


def run_batch(
    dataset: Dataset,
    classifier: Classifier,
    strategy: str,
    *,
    n_votes: int = 1,
    out_path: str | Path,
    trace_path: str | Path | None = None,
    manifest_path: str | Path | None = None,
    concurrency: int = 1,
    seed: int | None = None,
) -> RunResult:
    """Classify every dataset instance, writing predictions in dataset order.

    Instances already present in ``out_path`` are skipped, so an interrupted
    run resumes where it stopped. Per-instance failures are logged and counted
    without stopping the run. Output bytes are independent of ``concurrency``.
    """
    if concurrency < 1:
        raise RunnerError("concurrency must be >= 1")
    out_path = Path(out_path)
    trace_path = Path(trace_path) if trace_path is not None else None

    existing_ids: set[str] = set()
    appending = False
    if out_path.exists():
        existing = _read_existing(out_path)
        existing_ids = {p.id for p in existing}
        appending = bool(existing)

    if manifest_path is not None:
        manifest = run_manifest(
            dataset, classifier, strategy, n_votes, seed=seed, concurrency=concurrency
        )
        Path(manifest_path).write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    todo = [inst for inst in dataset if inst.id not in existing_ids]
    result = RunResult(skipped=len(dataset) - len(todo))

    def work(inst: Instance) -> tuple[Prediction, list[StepTrace]]:
        return classifier.self_consistency(inst, strategy, n_votes)

    out_fh = out_path.open("a", encoding="utf-8")
    trace_fh = trace_path.open("a", encoding="utf-8") if trace_path is not None else None
    done: dict[int, tuple[Prediction, list[StepTrace]] | None] = {}
    next_flush = 0

    def flush_ready() -> None:
        # write strictly in dataset order no matter what finished first
        nonlocal next_flush
        while next_flush in done:
            item = done.pop(next_flush)
            if item is not None:
                prediction, traces = item
                out_fh.write(json.dumps(prediction.to_row(), ensure_ascii=False) + "\n")
                out_fh.flush()
                if trace_fh is not None:
                    for trace in traces:
                        trace_fh.write(json.dumps(trace.to_row(), ensure_ascii=False) + "\n")
                    trace_fh.flush()
            next_flush += 1

    try:
        if concurrency == 1:
            for idx, inst in enumerate(todo):
                try:
                    done[idx] = work(inst)
                    result.completed += 1
                except Exception as exc:
                    log.error("%s: instance failed: %s", inst.id, exc)
                    result.failed += 1
                    result.failures.append((inst.id, str(exc)))
                    done[idx] = None
                flush_ready()
        else:
            with ThreadPoolExecutor(max_workers=concurrency) as pool:
                futures = {pool.submit(work, inst): (idx, inst) for idx, inst in enumerate(todo)}
                pending = set(futures)
                while pending:
                    finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for fut in finished:
                        idx, inst = futures[fut]
                        try:
                            done[idx] = fut.result()
                            result.completed += 1
                        except Exception as exc:
                            log.error("%s: instance failed: %s", inst.id, exc)
                            result.failed += 1
                            result.failures.append((inst.id, str(exc)))
                            done[idx] = None
                    flush_ready()
    finally:
        out_fh.close()
        if trace_fh is not None:
            trace_fh.close()

    if appending and result.completed:
        _restore_dataset_order(out_path, dataset)
    return result


def _restore_dataset_order(out_path: Path, dataset: Dataset) -> None:
    """Resumed appends can interleave after earlier holes; rewrite in order."""
    predictions = _read_existing(out_path)
    position = {inst.id: idx for idx, inst in enumerate(dataset)}
    ordered = sorted(
        enumerate(predictions), key=lambda kv: (position.get(kv[1].id, len(position)), kv[0])
    )
    if [idx for idx, _ in ordered] != list(range(len(predictions))):
        tmp = out_path.with_suffix(out_path.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for _, pred in ordered:
                fh.write(json.dumps(pred.to_row(), ensure_ascii=False) + "\n")
        tmp.replace(out_path)
