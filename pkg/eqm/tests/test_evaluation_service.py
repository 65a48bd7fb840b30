import itertools
import math

import numpy as np
import pytest

from eqm.core.custom_exceptions import (
    LengthMismatchError,
    NonFiniteScoresError,
    TooFewRowsError,
    TooFewSamplesError,
)
from eqm.schemas.forest import ForestParams
from eqm.schemas.model import EqmLevel
from eqm.services.eqm_model_service import EqmModelService
from eqm.services.evaluation_service import EvaluationService


CV_PARAMS = ForestParams(n_trees=20, seed=3)


class TestCorrelations:
    def test_perfect_agreement(self) -> None:
        metrics = EvaluationService.correlations([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 4.0])
        assert (metrics.srocc, metrics.plcc, metrics.krocc, metrics.rmse) == pytest.approx((1.0, 1.0, 1.0, 0.0))
        assert metrics.n == 4
        assert metrics.degenerate is False

    def test_reversed_order(self) -> None:
        metrics = EvaluationService.correlations([4.0, 3.0, 2.0, 1.0], [1.0, 2.0, 3.0, 4.0])
        assert metrics.srocc == pytest.approx(-1.0)
        assert metrics.krocc == pytest.approx(-1.0)

    def test_ties_use_average_ranks_and_tau_b(self) -> None:
        metrics = EvaluationService.correlations([1.0, 2.0, 2.0, 3.0], [1.0, 2.0, 3.0, 4.0])
        assert metrics.srocc == pytest.approx(4.5 / math.sqrt(4.5 * 5.0))
        assert metrics.krocc == pytest.approx(5.0 / math.sqrt(30.0))
        assert metrics.rmse == pytest.approx(math.sqrt((0 + 0 + 1 + 1) / 4))

    def test_constant_prediction_is_degenerate(self) -> None:
        metrics = EvaluationService.correlations([50.0, 50.0, 50.0], [40.0, 50.0, 60.0])
        assert (metrics.srocc, metrics.plcc, metrics.krocc) == (0.0, 0.0, 0.0)
        assert metrics.degenerate is True
        assert metrics.rmse == pytest.approx(math.sqrt(200.0 / 3.0))

    def test_length_mismatch(self) -> None:
        with pytest.raises(LengthMismatchError):
            EvaluationService.correlations([1.0, 2.0, 3.0], [1.0, 2.0])

    def test_too_few_samples(self) -> None:
        with pytest.raises(TooFewSamplesError):
            EvaluationService.correlations([1.0, 2.0], [2.0, 1.0])

    def test_non_finite_scores(self) -> None:
        with pytest.raises(NonFiniteScoresError):
            EvaluationService.correlations([1.0, float("nan"), 3.0], [1.0, 2.0, 3.0])


class TestCrossValidate:
    def test_report_shape_and_mean(self, training_dataset) -> None:
        report = EvaluationService.cross_validate(
            training_dataset, EqmLevel.NR, folds=4, reps=2, seed=5, params_base=CV_PARAMS, params_residual=CV_PARAMS
        )

        assert report.folds == 4
        assert report.n == len(training_dataset)
        assert len(report.repetitions) == 2
        assert report.srocc == pytest.approx(sum(r.srocc for r in report.repetitions) / 2)
        assert report.rmse == pytest.approx(sum(r.rmse for r in report.repetitions) / 2)
        assert report.srocc > 0.5

    def test_same_seed_same_report_for_any_thread_count(self, training_dataset) -> None:
        kwargs = {"folds": 3, "reps": 2, "seed": 9, "params_base": CV_PARAMS, "params_residual": CV_PARAMS}
        serial = EvaluationService.cross_validate(training_dataset, EqmLevel.METADATA_QP, threads=1, **kwargs)
        parallel = EvaluationService.cross_validate(training_dataset, EqmLevel.METADATA_QP, threads=2, **kwargs)
        assert serial == parallel

    def test_fold_count_validation(self, training_dataset) -> None:
        with pytest.raises(ValueError):
            EvaluationService.cross_validate(training_dataset, EqmLevel.NR, folds=1, reps=1)

    def test_more_folds_than_rows(self, training_dataset) -> None:
        with pytest.raises(TooFewRowsError) as excinfo:
            EvaluationService.cross_validate(training_dataset.subset(range(3)), EqmLevel.NR, folds=5, reps=1)
        assert excinfo.value.error_code == "evaluation.TooFewRows"


def test_evaluate_model_on_holdout(training_dataset, holdout_dataset):
    model = EqmModelService.train_eqm(training_dataset, EqmLevel.FR, CV_PARAMS, CV_PARAMS)
    report = EvaluationService.evaluate_model(model, holdout_dataset)

    assert report.n == len(holdout_dataset)
    assert report.folds is None
    assert report.srocc > 0.5


class TestCorrelationProperties:
    def test_rank_metrics_ignore_monotone_transforms(self) -> None:
        rng = np.random.default_rng(17)
        for _ in range(20):
            truth = rng.normal(50.0, 20.0, 30)
            pred = truth + rng.normal(0.0, 15.0, 30)
            plain = EvaluationService.correlations(pred, truth)
            cubed = EvaluationService.correlations(pred ** 3, truth)

            assert cubed.srocc == pytest.approx(plain.srocc, abs=1e-12)
            assert cubed.krocc == pytest.approx(plain.krocc, abs=1e-12)
            assert cubed.plcc != pytest.approx(plain.plcc, abs=1e-6)

    @pytest.mark.parametrize("gain, offset", [(2.0, 0.0), (0.5, 10.0), (3.7, -25.0)])
    def test_linear_correlation_ignores_positive_affine_maps(self, gain, offset) -> None:
        rng = np.random.default_rng(int(gain * 10))
        truth = rng.uniform(0.0, 100.0, 40)
        pred = truth + rng.normal(0.0, 8.0, 40)
        plain = EvaluationService.correlations(pred, truth)
        mapped = EvaluationService.correlations(gain * pred + offset, truth)

        assert mapped.plcc == pytest.approx(plain.plcc, abs=1e-12)
        assert mapped.srocc == pytest.approx(plain.srocc, abs=1e-12)
        assert mapped.rmse != pytest.approx(plain.rmse, rel=1e-3)

    def test_negative_gain_flips_linear_correlation(self) -> None:
        truth = [10.0, 35.0, 20.0, 80.0, 55.0]
        pred = [12.0, 30.0, 25.0, 70.0, 60.0]
        plain = EvaluationService.correlations(pred, truth)
        flipped = EvaluationService.correlations([-p for p in pred], truth)
        assert flipped.plcc == pytest.approx(-plain.plcc)


def _tau_b_by_pair_count(x, y) -> float:
    concordant = discordant = tied_x = tied_y = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        dx = x[i] - x[j]
        dy = y[i] - y[j]
        if dx == 0:
            tied_x += 1
        if dy == 0:
            tied_y += 1
        if dx * dy > 0:
            concordant += 1
        elif dx * dy < 0:
            discordant += 1
    pairs = len(x) * (len(x) - 1) // 2
    return (concordant - discordant) / math.sqrt((pairs - tied_x) * (pairs - tied_y))


def test_kendall_matches_pair_count_on_small_tied_samples():
    rng = np.random.default_rng(8)
    levels = (1.0, 2.0, 3.0)
    for n in range(3, 9):
        sequences = list(itertools.product(levels, repeat=n))
        truths = sequences if n <= 4 else [sequences[int(i)] for i in rng.choice(len(sequences), 2, replace=False)]
        for truth in truths:
            if len(set(truth)) == 1:
                continue
            for pred in sequences:
                krocc = EvaluationService.correlations(pred, truth).krocc
                if len(set(pred)) == 1:
                    assert krocc == 0.0
                else:
                    assert krocc == pytest.approx(_tau_b_by_pair_count(pred, truth), abs=1e-12)


def test_richer_levels_have_lower_held_out_error(cv_dataset):
    params = ForestParams(n_trees=40, seed=3)
    rmse = {
        level: EvaluationService.cross_validate(
            cv_dataset, level, folds=5, reps=2, seed=11, params_base=params, params_residual=params
        ).rmse
        for level in (EqmLevel.METADATA, EqmLevel.NR, EqmLevel.FR)
    }
    assert rmse[EqmLevel.FR] <= rmse[EqmLevel.NR] <= rmse[EqmLevel.METADATA]
