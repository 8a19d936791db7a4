"""Scoring: confusion counts, P/R/F1, macro-F1, per-category, kappa, vote curves."""

from __future__ import annotations

import math

import pytest

from metonymy.data import (
    Dataset,
    Instance,
    METONYMIC,
    NON_METONYMIC,
    Prediction,
    VoteRecord,
)
from metonymy.evaluate import (
    ConfusionCounts,
    EvalError,
    cohen_kappa,
    confusion,
    format_report,
    format_vote_curve,
    prf,
    report,
    vote_curve,
    vote_curve_csv,
)

from support import engineered_set


class TestConfusion:
    def test_counts_from_predictions(self):
        dataset, predictions = engineered_set(3, 1, 2, 4)
        counts = confusion(predictions, dataset)
        assert counts == ConfusionCounts(tp=3, fp=1, fn=2, tn=4)
        assert counts.total == 10

    def test_duplicate_prediction_rejected(self):
        dataset, predictions = engineered_set(1, 0, 0, 2)
        with pytest.raises(EvalError, match="duplicate"):
            confusion([predictions[0], predictions[0]], dataset)

    def test_unknown_id_rejected(self):
        dataset, _ = engineered_set(1, 0, 0, 2)
        stray = Prediction.from_votes("ghost", "cot", [VoteRecord(label=METONYMIC)])
        with pytest.raises(EvalError, match="unknown id"):
            confusion([stray], dataset)

    def test_unlabeled_instance_rejected(self):
        inst = Instance(id="u", sentence="A glass fell.", target="glass")
        dataset = Dataset(name="d", instances=[inst])
        pred = Prediction.from_votes("u", "cot", [VoteRecord(label=METONYMIC)])
        with pytest.raises(EvalError, match="no gold label"):
            confusion([pred], dataset)


class TestPRF:
    def test_hand_worked_example(self):
        got = prf(ConfusionCounts(tp=3, fp=1, fn=2, tn=4))
        assert got.precision == pytest.approx(0.75)
        assert got.recall == pytest.approx(0.6)
        assert got.f1 == pytest.approx(2 / 3)

    def test_negative_class_swaps_roles(self):
        counts = ConfusionCounts(tp=3, fp=1, fn=2, tn=4)
        swapped = ConfusionCounts(tp=4, fp=2, fn=1, tn=3)
        assert prf(counts, NON_METONYMIC) == prf(swapped, METONYMIC)

    def test_zero_over_zero_is_zero(self):
        silent = prf(ConfusionCounts(tp=0, fp=0, fn=5, tn=5))
        assert (silent.precision, silent.recall, silent.f1) == (0.0, 0.0, 0.0)
        empty = prf(ConfusionCounts())
        assert empty.f1 == 0.0

    def test_unknown_positive_class(self):
        with pytest.raises(EvalError):
            prf(ConfusionCounts(1, 1, 1, 1), positive="maybe")


class TestReport:
    def test_engineered_high_scores(self):
        dataset, predictions = engineered_set(94, 31, 31, 299)
        r = report(predictions, dataset)
        assert r.metonymic.f1 == pytest.approx(0.752, abs=5e-4)
        assert r.non_metonymic.f1 == pytest.approx(0.9061, abs=5e-4)
        assert r.macro_f1 == pytest.approx(0.8290, abs=5e-4)
        assert r.accuracy == pytest.approx(393 / 455)

    def test_engineered_low_scores(self):
        dataset, predictions = engineered_set(38, 22, 22, 115)
        r = report(predictions, dataset)
        assert r.metonymic.f1 == pytest.approx(0.6333, abs=5e-4)
        assert r.non_metonymic.f1 == pytest.approx(0.8394, abs=5e-4)
        assert r.macro_f1 == pytest.approx(0.7364, abs=5e-4)

    def test_macro_is_unweighted_mean_of_unrounded_f1(self):
        dataset, predictions = engineered_set(94, 31, 31, 299)
        r = report(predictions, dataset)
        assert math.isclose(r.macro_f1, (r.metonymic.f1 + r.non_metonymic.f1) / 2,
                            rel_tol=0, abs_tol=1e-15)

    def test_empty_predictions_rejected(self):
        dataset, _ = engineered_set(1, 0, 0, 2)
        with pytest.raises(EvalError, match="no predictions"):
            report([], dataset)

    def test_per_category_breakdown(self):
        instances = []
        predictions = []

        def add(i, category, gold, predicted):
            inst = Instance(
                id=f"c{i}",
                sentence="The glass stood on the shelf.",
                target="glass",
                category=category,
                gold=gold,
            )
            instances.append(inst)
            predictions.append(
                Prediction.from_votes(inst.id, "cot", [VoteRecord(label=predicted)])
            )

        # container: tp=2 fp=1 tn=1 -> met f1 = 4/5, non f1 = 2/3
        add(0, "container", METONYMIC, METONYMIC)
        add(1, "container", METONYMIC, METONYMIC)
        add(2, "container", NON_METONYMIC, METONYMIC)
        add(3, "container", NON_METONYMIC, NON_METONYMIC)
        # producer: fn=1 tn=2 -> met f1 = 0, non f1 = 4/5
        add(4, "producer", METONYMIC, NON_METONYMIC)
        add(5, "producer", NON_METONYMIC, NON_METONYMIC)
        add(6, "producer", NON_METONYMIC, NON_METONYMIC)
        # one uncategorized row joins the totals but no category row
        add(7, None, METONYMIC, METONYMIC)

        r = report(predictions, Dataset(name="d", instances=instances))
        assert set(r.per_category) == {"container", "producer"}
        container = r.per_category["container"]
        assert container.metonymic_f1 == pytest.approx(0.8)
        assert container.non_metonymic_f1 == pytest.approx(2 / 3)
        assert container.support == 4
        producer = r.per_category["producer"]
        assert producer.metonymic_f1 == 0.0
        assert producer.non_metonymic_f1 == pytest.approx(0.8)
        assert producer.support == 3
        assert r.counts.total == 8

    def test_format_report_mentions_everything(self):
        dataset, predictions = engineered_set(3, 1, 2, 4, category="location")
        text = format_report(report(predictions, dataset))
        assert "precision" in text and "macro-f1" in text
        assert "tp 3" in text and "tn 4" in text
        assert "location" in text


class TestKappa:
    def test_balanced_disagreement(self):
        a = [METONYMIC] * 40 + [METONYMIC] * 10 + [NON_METONYMIC] * 10 + [NON_METONYMIC] * 40
        b = [METONYMIC] * 40 + [NON_METONYMIC] * 10 + [METONYMIC] * 10 + [NON_METONYMIC] * 40
        r = cohen_kappa(a, b)
        assert r.observed == pytest.approx(0.8)
        assert r.expected == pytest.approx(0.5)
        assert r.kappa == pytest.approx(0.6)

    def test_perfect_agreement(self):
        a = [METONYMIC, NON_METONYMIC, METONYMIC]
        assert cohen_kappa(a, list(a)).kappa == 1.0

    def test_identical_constant_lists(self):
        a = [METONYMIC] * 7
        assert cohen_kappa(a, list(a)).kappa == 1.0

    def test_chance_level_is_zero(self):
        a = [METONYMIC] * 100
        b = [METONYMIC] * 50 + [NON_METONYMIC] * 50
        assert cohen_kappa(a, b).kappa == pytest.approx(0.0)

    def test_validation(self):
        with pytest.raises(EvalError, match="length"):
            cohen_kappa([METONYMIC], [METONYMIC, METONYMIC])
        with pytest.raises(EvalError, match="empty"):
            cohen_kappa([], [])
        with pytest.raises(EvalError, match="unknown label"):
            cohen_kappa(["yes"], [METONYMIC])


def curve_inputs():
    dataset, base = engineered_set(38, 22, 22, 118)
    # same gold labels, three flips fixed in the 9-vote run
    improved = []
    for pred, inst in zip(base, dataset):
        label = pred.final
        improved.append((inst, label))
    flips_fn_to_tp = [i for i, (inst, lab) in enumerate(improved)
                      if inst.gold == METONYMIC and lab == NON_METONYMIC][:3]
    flips_fp_to_tn = [i for i, (inst, lab) in enumerate(improved)
                      if inst.gold == NON_METONYMIC and lab == METONYMIC][:3]
    nine = []
    for i, (inst, label) in enumerate(improved):
        if i in flips_fn_to_tp:
            label = METONYMIC
        elif i in flips_fp_to_tn:
            label = NON_METONYMIC
        nine.append(
            Prediction.from_votes(inst.id, "cot2s", [VoteRecord(label=label)] * 9)
        )
    return dataset, base, nine


class TestVoteCurve:
    def test_delta_between_one_and_nine_votes(self):
        dataset, base, nine = curve_inputs()
        points = vote_curve({1: base, 9: nine}, dataset)
        assert [p.n_votes for p in points] == [1, 9]
        assert points[0].metonymic_f1 == pytest.approx(76 / 120)
        assert points[0].delta == 0.0
        assert points[1].metonymic_f1 == pytest.approx(82 / 120)
        assert points[1].delta == pytest.approx(0.05)

    def test_requires_single_vote_baseline(self):
        dataset, base, nine = curve_inputs()
        with pytest.raises(EvalError, match="n=1"):
            vote_curve({9: nine}, dataset)

    def test_rejects_even_vote_counts(self):
        dataset, base, _ = curve_inputs()
        with pytest.raises(EvalError, match="odd"):
            vote_curve({1: base, 2: base}, dataset)

    def test_rejects_mismatched_ids(self):
        dataset, base, nine = curve_inputs()
        with pytest.raises(EvalError, match="different ids"):
            vote_curve({1: base, 9: nine[:-1]}, dataset)

    def test_formatting(self):
        dataset, base, nine = curve_inputs()
        points = vote_curve({1: base, 9: nine}, dataset)
        text = format_vote_curve(points)
        assert "n_votes" in text and "+0.0500" in text
        csv = vote_curve_csv(points)
        header, row1, row9 = csv.strip().splitlines()
        assert header == "n_votes,metonymic_f1,delta"
        # full-precision floats round trip
        assert float(row9.split(",")[1]) == points[1].metonymic_f1
