"""Acceptance checks for the encoder baseline.

Both criteria fine-tune the full encoder on the complete converted
dataset (5 seeds x 5 folds plus 5 holdout runs) and take roughly 1-2
hours on one GPU, so they only run when explicitly requested:

  BASELINE_FULL=1 CONMEC_JSONL=/path/to/conmec.jsonl pytest baseline/tests/test_acceptance.py

BASELINE_ENCODER overrides the default pretrained encoder id. Metrics
are produced by the classifier pipeline's own evaluator (the `metonymy`
command), invoked on the written prediction files; nothing is imported
across the package boundary.
"""

from __future__ import annotations

import json
import os
import shutil
import statistics
import subprocess
from pathlib import Path

import pytest

from baseline.data import load_instances
from baseline.train import TrainConfig, train_and_predict

RUN = os.environ.get("BASELINE_FULL") == "1" and bool(os.environ.get("CONMEC_JSONL"))

pytestmark = pytest.mark.skipif(
    not RUN, reason="full baseline run needs BASELINE_FULL=1 and CONMEC_JSONL"
)


def verdict(criterion: int, ok: bool, detail: str) -> None:
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, detail


def encoder_id() -> str:
    return os.environ.get("BASELINE_ENCODER", "bert-base-uncased")


def evaluate(dataset: Path, predictions: Path, out: Path) -> dict:
    if shutil.which("metonymy") is None:
        pytest.fail("the primary `metonymy` command is not installed")
    proc = subprocess.run(
        [
            "metonymy",
            "evaluate",
            "--dataset",
            str(dataset),
            "--predictions",
            str(predictions),
            "--json",
            str(out),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return json.loads(out.read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def dataset_path() -> Path:
    return Path(os.environ["CONMEC_JSONL"])


@pytest.fixture(scope="module")
def cv5_reports(dataset_path, tmp_path_factory) -> list[dict]:
    """One evaluator report per seed for the plain cross-validation regime."""
    work = tmp_path_factory.mktemp("cv5")
    instances = load_instances(dataset_path)
    config = TrainConfig(encoder=encoder_id())
    result = train_and_predict(instances, config, work)
    return [
        evaluate(dataset_path, path, work / f"{path.stem}.report.json")
        for path in result.files
    ]


@pytest.fixture(scope="module")
def producer_holdout_reports(dataset_path, tmp_path_factory) -> list[dict]:
    """One evaluator report per seed with producer excluded from training."""
    work = tmp_path_factory.mktemp("cc")
    instances = load_instances(dataset_path)
    config = TrainConfig(encoder=encoder_id(), mode="cross_category", holdout="producer")
    result = train_and_predict(instances, config, work)
    return [
        evaluate(dataset_path, path, work / f"{path.stem}.report.json")
        for path in result.files
    ]


def test_criterion_9_cv5_quality(cv5_reports):
    met = statistics.mean(r["metonymic"]["f1"] for r in cv5_reports)
    non = statistics.mean(r["non_metonymic"]["f1"] for r in cv5_reports)
    verdict(
        9,
        met >= 0.70 and non >= 0.87,
        f"seed-averaged cv5 metonymic f1 {met:.4f} (>= 0.70 required), "
        f"non-metonymic f1 {non:.4f} (>= 0.87 required) over {len(cv5_reports)} seeds",
    )


def test_criterion_10_cross_category_degradation(cv5_reports, producer_holdout_reports):
    cv5_producer = statistics.mean(
        r["per_category"]["producer"]["metonymic_f1"] for r in cv5_reports
    )
    holdout = statistics.mean(
        r["metonymic"]["f1"] for r in producer_holdout_reports
    )
    verdict(
        10,
        holdout <= cv5_producer - 0.15,
        f"producer metonymic f1 drops from {cv5_producer:.4f} (cv5) to "
        f"{holdout:.4f} when held out (required drop >= 0.15)",
    )
