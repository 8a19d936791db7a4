"""Command-line interface.

Subcommands: augment, mine, sample, classify, evaluate, stats, kappa,
vote-curve. Shared flags may appear on any subcommand; values resolve as
flags > config file > defaults. Every command exits 0 only when nothing went
wrong; partial failures are counted in the printed summary and flip the exit
code to 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from . import data, evaluate, mining
from .backend import Backend, BackendError, CachingBackend, HttpBackend, ScriptedBackend
from .classify import Classifier, PromptError, PromptLibrary, RunnerError, SamplingParams, run_batch
from .config import ConfigError, RunConfig, load_config
from .data import DataError, LoadError
from .evaluate import EvalError
from .mining import MiningError

log = logging.getLogger(__name__)

_STRATEGY_CHOICES = ("basic", "cot", "cot2s", "basic-sc", "cot-sc", "cot2s-sc")


class CliError(RuntimeError):
    """User-facing command error; message printed without a traceback."""


def _common_flags(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("shared options")
    g.add_argument("--config", metavar="FILE", help="key = value configuration file")
    g.add_argument("--seed", type=int, help="seed for all randomness in this command")
    g.add_argument("--cache-dir", metavar="DIR", help="record/replay cache directory")
    g.add_argument("--concurrency", type=int, help="parallel in-flight instances")
    g.add_argument("--votes", type=int, help="self-consistency vote count (odd)")
    g.add_argument(
        "--with-context",
        action="store_const",
        const=True,
        help="include surrounding context sentences in prompts",
    )
    g.add_argument("--strategy", choices=_STRATEGY_CHOICES, help="prompting strategy")
    g.add_argument("--backend", choices=("live", "scripted", "replay"), help="backend kind")
    g.add_argument("--endpoint", help="chat-completions endpoint URL")
    g.add_argument("--model", help="model name sent to the backend")
    g.add_argument("--api-key-env", help="environment variable holding the bearer token")
    g.add_argument("--script", dest="script_path", help="scripted-backend rules JSON")
    g.add_argument("--prompt-dir", help="directory overriding the packaged prompts")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides = {
        "seed": args.seed,
        "cache_dir": args.cache_dir,
        "concurrency": args.concurrency,
        "votes": args.votes,
        "with_context": args.with_context,
        "strategy": args.strategy,
        "backend": args.backend,
        "endpoint": args.endpoint,
        "model": args.model,
        "api_key_env": args.api_key_env,
        "script_path": args.script_path,
        "prompt_dir": args.prompt_dir,
    }
    return load_config(args.config, overrides)


def resolve_strategy(cfg: RunConfig) -> tuple[str, int]:
    """Map -sc aliases to (base strategy, vote count)."""
    name = cfg.strategy
    if name not in _STRATEGY_CHOICES:
        raise CliError(
            f"unknown strategy {name!r}; valid strategies: {', '.join(_STRATEGY_CHOICES)}"
        )
    sc = name.endswith("-sc")
    base = name[:-3] if sc else name
    votes = cfg.votes if cfg.votes is not None else (9 if sc else 1)
    if votes < 1 or votes % 2 == 0:
        raise CliError(f"vote count must be odd and positive, got {votes}")
    return base, votes


def build_backend(cfg: RunConfig) -> Backend:
    base: Backend | None = None
    if cfg.backend == "scripted":
        if not cfg.script_path:
            raise CliError("scripted backend needs --script rules.json")
        base = ScriptedBackend.from_json(cfg.script_path)
    elif cfg.backend == "live":
        if not cfg.endpoint:
            raise CliError("live backend needs --endpoint")
        base = HttpBackend(
            cfg.endpoint,
            cfg.api_key_env,
            timeout=cfg.timeout,
            max_attempts=cfg.max_attempts,
            backoff_start=cfg.backoff_start,
            max_in_flight=cfg.max_in_flight,
        )
    elif cfg.backend != "replay":
        raise CliError(f"unknown backend {cfg.backend!r}")
    if cfg.cache_dir:
        return CachingBackend(cfg.cache_dir, base)
    if base is None:
        raise CliError("replay backend needs --cache-dir")
    return base


def _resolve_model(cfg: RunConfig) -> str:
    if cfg.model:
        return cfg.model
    if cfg.backend == "scripted":
        return "scripted"
    raise CliError("a --model name is required for live or replay backends")


def build_classifier(cfg: RunConfig) -> Classifier:
    return Classifier(
        backend=build_backend(cfg),
        model=_resolve_model(cfg),
        prompts=PromptLibrary.load(cfg.prompt_dir),
        params=SamplingParams(
            categorize_temperature=cfg.categorize_temperature,
            cot_temperature=cfg.cot_temperature,
            top_p=cfg.top_p,
            cot_max_tokens=cfg.cot_max_tokens,
            categorize_max_tokens=cfg.categorize_max_tokens,
        ),
        with_context=cfg.with_context,
    )


def _load_dataset_reporting(path: str) -> tuple[data.Dataset, int]:
    rejects: list[data.RowError] = []
    dataset = data.load_dataset(path, rejects=rejects)
    for r in rejects:
        print(f"warning: {path}:{r.line}: {r.reason}", file=sys.stderr)
    return dataset, len(rejects)


def _write_json(path: str | Path, payload: dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sidecar(out: str | Path, suffix: str) -> Path:
    out = Path(out)
    stem = out.name[: -len(".jsonl")] if out.name.endswith(".jsonl") else out.name
    return out.with_name(stem + suffix)


def cmd_stats(args: argparse.Namespace) -> int:
    dataset, rejected = _load_dataset_reporting(args.dataset)
    stats = data.dataset_stats(dataset)
    print(data.format_stats(stats))
    if args.json:
        rows = {
            (cat if cat is not None else "(none)"): {
                "metonymic": row.metonymic,
                "non_metonymic": row.non_metonymic,
                "unlabeled": row.unlabeled,
                "total": row.total,
            }
            for cat, row in stats.rows.items()
        }
        _write_json(
            args.json,
            {
                "dataset": dataset.name,
                "rows": rows,
                "total": {
                    "metonymic": stats.total.metonymic,
                    "non_metonymic": stats.total.non_metonymic,
                    "unlabeled": stats.total.unlabeled,
                    "total": stats.total.total,
                },
            },
        )
    if rejected:
        print(f"{rejected} row(s) rejected", file=sys.stderr)
        return 1
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    strategy, votes = resolve_strategy(cfg)
    dataset, rejected = _load_dataset_reporting(args.dataset)
    if not len(dataset):
        raise CliError(f"no usable instances in {args.dataset}")
    classifier = build_classifier(cfg)
    out = Path(args.out)
    trace = Path(args.trace) if args.trace else _sidecar(out, ".trace.jsonl")
    manifest = Path(args.manifest) if args.manifest else _sidecar(out, ".manifest.json")
    result = run_batch(
        dataset,
        classifier,
        strategy,
        n_votes=votes,
        out_path=out,
        trace_path=trace,
        manifest_path=manifest,
        concurrency=cfg.concurrency,
        seed=cfg.seed,
    )
    print(
        f"classified {result.completed}, skipped {result.skipped} already present, "
        f"{result.failed} failed"
    )
    for instance_id, reason in result.failures:
        print(f"failed: {instance_id}: {reason}", file=sys.stderr)
    return 1 if (result.failed or rejected) else 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    dataset, rejected = _load_dataset_reporting(args.dataset)
    predictions = data.read_predictions(args.predictions)
    labeled_ids = {inst.id for inst in dataset if inst.gold is not None}
    predicted_ids = {p.id for p in predictions}
    missing = labeled_ids - predicted_ids
    if missing:
        print(
            f"warning: {len(missing)} labeled instance(s) have no prediction; "
            f"scoring the {len(predicted_ids & labeled_ids)} covered one(s)",
            file=sys.stderr,
        )
    rep = evaluate.report(predictions, dataset)
    print(evaluate.format_report(rep))
    if args.json:
        _write_json(args.json, rep.to_dict())
    return 1 if rejected else 0


def _labels_by_id(path: str) -> dict[str, str]:
    """id -> label from either a dataset file or a prediction file."""
    labels: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(path, line_no, f"malformed JSON: {exc.msg}")
            if not isinstance(row, dict) or "id" not in row:
                raise LoadError(path, line_no, "row needs an id")
            if "final" in row:
                label = data._label_from_wire(row["final"])
            elif row.get("label") in data.LABELS:
                label = row["label"]
            else:
                continue  # unlabeled dataset row
            if row["id"] in labels:
                raise LoadError(path, line_no, f"duplicate id {row['id']!r}")
            labels[row["id"]] = label
    return labels


def cmd_kappa(args: argparse.Namespace) -> int:
    a = _labels_by_id(args.a)
    b = _labels_by_id(args.b)
    common = sorted(set(a) & set(b))
    if not common:
        raise CliError("the two files share no labeled ids")
    dropped = (len(a) - len(common)) + (len(b) - len(common))
    if dropped:
        print(f"warning: {dropped} id(s) present in only one file were ignored", file=sys.stderr)
    rep = evaluate.cohen_kappa([a[i] for i in common], [b[i] for i in common])
    print(
        f"n {len(common)}    observed {rep.observed:.4f}    "
        f"expected {rep.expected:.4f}    kappa {rep.kappa:.4f}"
    )
    if args.json:
        _write_json(args.json, {**rep.to_dict(), "n": len(common)})
    return 0


def cmd_vote_curve(args: argparse.Namespace) -> int:
    dataset, rejected = _load_dataset_reporting(args.dataset)
    sets: dict[int, list[data.Prediction]] = {}
    for path in args.predictions:
        preds = data.read_predictions(path)
        if not preds:
            raise CliError(f"{path}: empty prediction file")
        counts = {len(p.votes) for p in preds}
        if len(counts) != 1:
            raise CliError(f"{path}: mixed vote counts {sorted(counts)}")
        n = counts.pop()
        if n in sets:
            raise CliError(f"two prediction files both carry {n} votes")
        sets[n] = preds
    points = evaluate.vote_curve(sets, dataset)
    print(evaluate.format_vote_curve(points))
    if args.csv:
        Path(args.csv).write_text(evaluate.vote_curve_csv(points), encoding="utf-8")
    if args.json:
        _write_json(args.json, {"points": [p.to_dict() for p in points]})
    return 1 if rejected else 0


def cmd_augment(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    seeds = mining.read_seeds(args.seeds)
    if not seeds:
        raise CliError(f"no seeds in {args.seeds}")
    if args.seeds_only:
        augmenter = None
    else:
        augmenter = mining.Augmenter(
            backend=build_backend(cfg),
            model=_resolve_model(cfg),
            temperature=cfg.augment_temperature,
            top_p=cfg.top_p,
            max_tokens=cfg.augment_max_tokens,
        )
    checkpoint = args.checkpoint or str(_sidecar(args.out, ".progress.jsonl"))
    lexicon = mining.build_pair_lexicon(seeds, augmenter, k=cfg.augment_k, checkpoint=checkpoint)
    lexicon.write(args.out)
    _write_json(
        _sidecar(args.out, ".manifest.json"),
        {
            "command": "augment",
            "seeds": str(args.seeds),
            "out": str(args.out),
            "k": cfg.augment_k,
            "model": None if augmenter is None else augmenter.model,
            "seed": cfg.seed,
            "entries": len(lexicon),
        },
    )
    nouns, verbs = lexicon.nouns(), lexicon.verbs()
    print(
        f"lexicon: {len(lexicon)} pair(s) over {len(nouns)} noun(s) and "
        f"{len(verbs)} verb(s) from {len(seeds)} seed(s)"
    )
    return 0


def cmd_mine(args: argparse.Namespace) -> int:
    lexicon = mining.PairLexicon.read(args.lexicon)
    stats = mining.MiningStats()
    index = mining._LexiconIndex.build(lexicon)
    candidates: list[mining.CandidateSentence] = []
    for path in args.conllu:
        for sentence in mining.read_conllu(path):
            stats.sentences += 1
            for cand in mining.scan_sentence(sentence, lexicon, index):
                stats.record(cand)
                candidates.append(cand)
    dataset = mining.candidates_to_dataset(candidates, name=Path(args.out).stem)
    data.write_dataset(dataset, args.out)
    stats_path = args.stats or _sidecar(args.out, ".stats.json")
    _write_json(stats_path, stats.to_dict())
    dropped = stats.candidates - len(dataset)
    print(
        f"scanned {stats.sentences} sentence(s): {stats.candidates} candidate(s), "
        f"{len(dataset)} written"
    )
    return 1 if dropped else 0


def cmd_sample(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    rows: list[dict[str, Any]] = []
    seen: set[str] = set()
    with open(args.input, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LoadError(args.input, line_no, f"malformed JSON: {exc.msg}")
            if not isinstance(row, dict) or not row.get("id") or not row.get("target"):
                raise LoadError(args.input, line_no, "row needs id and target")
            if row["id"] in seen:
                raise LoadError(args.input, line_no, f"duplicate id {row['id']!r}")
            seen.add(row["id"])
            rows.append(row)
    sampled = mining.round_robin_sample(
        rows, key=lambda r: str(r["target"]).casefold(), n=args.n, seed=cfg.seed
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in sampled:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    _write_json(
        _sidecar(args.out, ".manifest.json"),
        {
            "command": "sample",
            "input": str(args.input),
            "out": str(args.out),
            "n": args.n,
            "seed": cfg.seed,
            "written": len(sampled),
        },
    )
    print(f"sampled {len(sampled)} of {len(rows)} row(s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metonymy",
        description="Mine, classify, and score metonymic readings of common nouns.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="grow a pair lexicon from seed pairs")
    p.add_argument("--seeds", required=True, help="seed pairs JSONL")
    p.add_argument("--out", required=True, help="lexicon JSONL to write")
    p.add_argument("--checkpoint", help="resumable progress file")
    p.add_argument("--seeds-only", action="store_true", help="skip augmentation")
    _common_flags(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("mine", help="scan CoNLL-U files for candidate sentences")
    p.add_argument("--lexicon", required=True, help="pair lexicon JSONL")
    p.add_argument("--conllu", required=True, nargs="+", help="CoNLL-U file(s)")
    p.add_argument("--out", required=True, help="candidates JSONL to write")
    p.add_argument("--stats", help="sidecar stats JSON (default: <out>.stats.json)")
    _common_flags(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("sample", help="uniform-by-noun sample of candidate rows")
    p.add_argument("--input", required=True, help="candidates JSONL")
    p.add_argument("--out", required=True, help="sampled JSONL to write")
    p.add_argument("--n", required=True, type=int, help="sample size")
    _common_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("classify", help="run a prompting strategy over a dataset")
    p.add_argument("--dataset", required=True, help="normalized dataset JSONL")
    p.add_argument("--out", required=True, help="predictions JSONL (resumable)")
    p.add_argument("--trace", help="step trace JSONL (default: <out>.trace.jsonl)")
    p.add_argument("--manifest", help="run manifest JSON (default: <out>.manifest.json)")
    _common_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--dataset", required=True, help="gold dataset JSONL")
    p.add_argument("--predictions", required=True, help="predictions JSONL")
    p.add_argument("--json", help="write the full report as JSON")
    _common_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="label distribution per category")
    p.add_argument("--dataset", required=True, help="dataset JSONL")
    p.add_argument("--json", help="write the table as JSON")
    _common_flags(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("kappa", help="Cohen's kappa between two label files")
    p.add_argument("--a", required=True, help="dataset or prediction JSONL")
    p.add_argument("--b", required=True, help="dataset or prediction JSONL")
    p.add_argument("--json", help="write the numbers as JSON")
    _common_flags(p)
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("vote-curve", help="metonymic F1 as the vote count grows")
    p.add_argument("--dataset", required=True, help="gold dataset JSONL")
    p.add_argument(
        "--predictions", required=True, nargs="+", help="prediction JSONL files, one per vote count"
    )
    p.add_argument("--csv", help="write the curve as CSV")
    p.add_argument("--json", help="write the curve as JSON")
    _common_flags(p)
    p.set_defaults(func=cmd_vote_curve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        CliError,
        ConfigError,
        DataError,
        MiningError,
        EvalError,
        PromptError,
        RunnerError,
        BackendError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
