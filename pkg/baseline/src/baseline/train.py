"""Encoder fine-tuning: 5-fold cross-validation and cross-category holdout.

The classifier head reads the last hidden state of the [CLS] position
and maps it to two logits; training is plain Adam, no scheduler. Folds
are assigned by a seeded shuffle, so a (config, seed) pair fixes the
partition exactly.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import torch
from torch import nn
from torch.utils.data import DataLoader
from transformers import AutoModel, AutoTokenizer

from baseline.data import (
    CATEGORIES,
    CLOSE_MARK,
    METONYMIC,
    NON_METONYMIC,
    OPEN_MARK,
    BaselineError,
    Instance,
    mark_target,
    write_predictions,
)

log = logging.getLogger(__name__)

MODES = ("cv5", "cross_category")
_LABEL_TO_ID = {NON_METONYMIC: 0, METONYMIC: 1}
_ID_TO_LABEL = {i: label for label, i in _LABEL_TO_ID.items()}


@dataclass(frozen=True)
class TrainConfig:
    encoder: str = "bert-base-uncased"
    learning_rate: float = 1e-5
    epochs: int = 3
    batch_size: int = 16
    folds: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    mode: str = "cv5"
    holdout: str | None = None
    max_length: int = 128  # subword cap; longer sentences are truncated
    device: str | None = None  # None picks cuda when available, else cpu

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise BaselineError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.mode == "cv5":
            if self.folds < 2:
                raise BaselineError(f"folds must be >= 2, got {self.folds}")
            if self.holdout is not None:
                raise BaselineError("holdout only applies to cross_category mode")
        else:
            if self.holdout not in CATEGORIES:
                raise BaselineError(
                    f"cross_category mode needs a holdout category, got {self.holdout!r}"
                )
        if not self.seeds:
            raise BaselineError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise BaselineError("seeds must be distinct")
        for name, value in (
            ("learning_rate", self.learning_rate),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
            ("max_length", self.max_length),
        ):
            if value <= 0:
                raise BaselineError(f"{name} must be positive, got {value}")


def assign_folds(n: int, folds: int, seed: int) -> list[int]:
    """Fold id per instance index: seeded shuffle dealt round-robin.

    Folds are disjoint by construction, cover all n indices, and differ
    in size by at most one.
    """
    if n < folds:
        raise BaselineError(f"{n} instance(s) cannot fill {folds} folds")
    order = list(range(n))
    random.Random(seed).shuffle(order)
    assignment = [0] * n
    for position, index in enumerate(order):
        assignment[index] = position % folds
    return assignment


def _check_partition(assignment: list[int], folds: int) -> None:
    covered = [0] * folds
    for fold in assignment:
        covered[fold] += 1
    if sum(covered) != len(assignment) or min(covered) == 0:
        raise BaselineError(f"fold partition broken: sizes {covered}")


def resolve_device(config: TrainConfig) -> torch.device:
    if config.device is not None:
        return torch.device(config.device)
    if torch.cuda.is_available():
        return torch.device("cuda")
    log.warning("no GPU available, training on CPU")
    return torch.device("cpu")


class _Classifier(nn.Module):
    """Pretrained encoder with a linear binary head over the [CLS] state."""

    def __init__(self, encoder: str) -> None:
        super().__init__()
        self.backbone = AutoModel.from_pretrained(encoder)
        self.head = nn.Linear(self.backbone.config.hidden_size, 2)

    def forward(self, **encoded: torch.Tensor) -> torch.Tensor:
        hidden = self.backbone(**encoded).last_hidden_state[:, 0]
        return self.head(hidden)


def _load_tokenizer(encoder: str):
    tokenizer = AutoTokenizer.from_pretrained(encoder)
    tokenizer.add_special_tokens({"additional_special_tokens": [OPEN_MARK, CLOSE_MARK]})
    return tokenizer


def _encode(tokenizer, instances: Iterable[Instance], max_length: int) -> list[dict]:
    items = []
    for inst in instances:
        encoded = tokenizer(
            mark_target(inst), truncation=True, max_length=max_length
        )
        items.append(
            {
                "input_ids": encoded["input_ids"],
                "attention_mask": encoded["attention_mask"],
                "label": -1 if inst.gold is None else _LABEL_TO_ID[inst.gold],
            }
        )
    return items


def _train_one_model(
    train_items: list[dict],
    eval_items: list[dict],
    config: TrainConfig,
    tokenizer,
    device: torch.device,
    seed: int,
) -> list[int]:
    """Fine-tune one fresh classifier; predicted label ids for eval_items."""
    torch.manual_seed(seed)
    model = _Classifier(config.encoder)
    model.backbone.resize_token_embeddings(len(tokenizer))
    model.to(device)

    def collate(batch: list[dict]) -> dict[str, torch.Tensor]:
        padded = tokenizer.pad(
            [{k: item[k] for k in ("input_ids", "attention_mask")} for item in batch],
            return_tensors="pt",
        )
        padded["label"] = torch.tensor([item["label"] for item in batch])
        return padded

    generator = torch.Generator().manual_seed(seed)
    loader = DataLoader(
        train_items,
        batch_size=config.batch_size,
        shuffle=True,
        generator=generator,
        collate_fn=collate,
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    loss_fn = nn.CrossEntropyLoss()

    model.train()
    for _ in range(config.epochs):
        for batch in loader:
            labels = batch.pop("label").to(device)
            logits = model(**{k: v.to(device) for k, v in batch.items()})
            loss = loss_fn(logits, labels)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

    model.eval()
    eval_loader = DataLoader(
        eval_items, batch_size=config.batch_size, shuffle=False, collate_fn=collate
    )
    predicted: list[int] = []
    with torch.no_grad():
        for batch in eval_loader:
            batch.pop("label")
            logits = model(**{k: v.to(device) for k, v in batch.items()})
            predicted.extend(logits.argmax(dim=1).tolist())
    return predicted


def _require_gold(instances: list[Instance]) -> None:
    unlabeled = [inst.id for inst in instances if inst.gold is None]
    if unlabeled:
        raise BaselineError(
            f"{len(unlabeled)} instance(s) have no gold label "
            f"(first: {', '.join(unlabeled[:3])})"
        )


def train_one_seed(
    instances: list[Instance],
    config: TrainConfig,
    seed: int,
    device: torch.device,
    tokenizer,
) -> dict[str, str]:
    """Predicted label per instance id, each taken from its held-out model."""
    items = _encode(tokenizer, instances, config.max_length)
    predictions: dict[str, str] = {}

    if config.mode == "cv5":
        assignment = assign_folds(len(instances), config.folds, seed)
        _check_partition(assignment, config.folds)
        for fold in range(config.folds):
            train_items = [it for it, f in zip(items, assignment) if f != fold]
            eval_pairs = [
                (inst, it) for inst, it, f in zip(instances, items, assignment) if f == fold
            ]
            labels = _train_one_model(
                train_items,
                [it for _, it in eval_pairs],
                config,
                tokenizer,
                device,
                seed * 1000 + fold,
            )
            for (inst, _), label_id in zip(eval_pairs, labels):
                predictions[inst.id] = _ID_TO_LABEL[label_id]
    else:
        present = {inst.category for inst in instances}
        if None in present:
            raise BaselineError("cross_category mode needs a category on every instance")
        if config.holdout not in present:
            raise BaselineError(f"no instances with holdout category {config.holdout!r}")
        if len(present) < 2:
            raise BaselineError("cross_category mode needs at least two categories")
        train_items = [
            it for inst, it in zip(instances, items) if inst.category != config.holdout
        ]
        eval_pairs = [
            (inst, it) for inst, it in zip(instances, items) if inst.category == config.holdout
        ]
        labels = _train_one_model(
            train_items,
            [it for _, it in eval_pairs],
            config,
            tokenizer,
            device,
            seed,
        )
        for (inst, _), label_id in zip(eval_pairs, labels):
            predictions[inst.id] = _ID_TO_LABEL[label_id]
    return predictions


@dataclass
class TrainResult:
    files: list[Path] = field(default_factory=list)
    covered: int = 0


def train_and_predict(
    instances: list[Instance], config: TrainConfig, out_dir: str | Path
) -> TrainResult:
    """One prediction file per seed; every eligible instance predicted once.

    cv5 covers the whole dataset via held-out folds; cross_category covers
    the held-out category only. A manifest records the config and files.
    """
    _require_gold(instances)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    device = resolve_device(config)
    tokenizer = _load_tokenizer(config.encoder)

    result = TrainResult()
    for seed in config.seeds:
        predictions = train_one_seed(instances, config, seed, device, tokenizer)
        eligible = [inst.id for inst in instances if inst.id in predictions]
        if config.mode == "cv5" and len(predictions) != len(instances):
            raise BaselineError(
                f"seed {seed}: {len(predictions)} prediction(s) for {len(instances)} instance(s)"
            )
        path = out_dir / f"{config.mode}_seed{seed}.jsonl"
        write_predictions(path, [(inst_id, predictions[inst_id]) for inst_id in eligible])
        result.files.append(path)
        result.covered = len(eligible)
        log.info("seed %d: wrote %d prediction(s) to %s", seed, len(eligible), path)

    manifest = {
        "encoder": config.encoder,
        "mode": config.mode,
        "holdout": config.holdout,
        "folds": config.folds,
        "seeds": list(config.seeds),
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "max_length": config.max_length,
        "device": str(device),
        "instances": len(instances),
        "covered_per_seed": result.covered,
        "files": [p.name for p in result.files],
    }
    with (out_dir / "manifest.json").open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result
