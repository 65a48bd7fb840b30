"""
Service layer for prediction accuracy metrics and repeated k-fold cross-validation
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np
from scipy import stats

from ..constants import EvaluationConstants
from ..core.custom_exceptions import (
    LengthMismatchError,
    NonFiniteScoresError,
    TooFewRowsError,
    TooFewSamplesError,
)
from ..schemas.dataset import LabeledDataset
from ..schemas.evaluation import CorrelationMetrics, EvalReport
from ..schemas.forest import ForestParams
from ..schemas.model import EqmLevel, EqmModel
from .eqm_model_service import EqmModelService
from .forest_service import derive_seed


logger = logging.getLogger(__name__)


def _bounded(value: float) -> float:
    return float(min(1.0, max(-1.0, value)))


class EvaluationService:
    """Correlation metrics and the cross-validation harness"""

    @staticmethod
    def correlations(pred: Sequence[float], truth: Sequence[float]) -> CorrelationMetrics:
        """
        SROCC (Pearson on average ranks), PLCC, Kendall tau-b and RMSE

        A constant pred or truth vector has no defined correlation; all three
        correlations are then reported as 0 with ``degenerate`` set.
        """
        pred_arr = np.asarray(pred, dtype=np.float64)
        truth_arr = np.asarray(truth, dtype=np.float64)
        if pred_arr.shape != truth_arr.shape or pred_arr.ndim != 1:
            raise LengthMismatchError(f"{pred_arr.size} predictions for {truth_arr.size} truth values")
        if pred_arr.size < EvaluationConstants.MIN_SAMPLES:
            raise TooFewSamplesError(
                f"{pred_arr.size} sample(s) given, at least {EvaluationConstants.MIN_SAMPLES} required"
            )
        if not (np.all(np.isfinite(pred_arr)) and np.all(np.isfinite(truth_arr))):
            raise NonFiniteScoresError("Prediction and truth vectors must be finite")

        rmse = math.sqrt(float(np.mean((pred_arr - truth_arr) ** 2)))
        if np.all(pred_arr == pred_arr[0]) or np.all(truth_arr == truth_arr[0]):
            return CorrelationMetrics(srocc=0.0, plcc=0.0, krocc=0.0, rmse=rmse, n=pred_arr.size, degenerate=True)

        return CorrelationMetrics(
            srocc=_bounded(stats.spearmanr(pred_arr, truth_arr).statistic),
            plcc=_bounded(stats.pearsonr(pred_arr, truth_arr).statistic),
            krocc=_bounded(stats.kendalltau(pred_arr, truth_arr, variant="b").statistic),
            rmse=rmse,
            n=pred_arr.size,
        )

    @classmethod
    def evaluate_model(cls, model: EqmModel, data: LabeledDataset) -> EvalReport:
        """Score a trained model on an independent labeled dataset."""
        pred = EqmModelService.predict_many(model, [row.features for row in data.rows])
        metrics = cls.correlations(pred, data.mos_vector())
        return EvalReport(**metrics.model_dump())

    @classmethod
    def _run_repetition(
        cls,
        data: LabeledDataset,
        rep: int,
        folds: int,
        seed: int,
        train_kwargs: dict,
    ) -> CorrelationMetrics:
        rng = np.random.default_rng(derive_seed(seed, rep))
        order = rng.permutation(len(data))
        pred = np.empty(len(data))
        for held_out in np.array_split(order, folds):
            train_idx = np.setdiff1d(order, held_out, assume_unique=True)
            model = EqmModelService.train_eqm(data.subset(np.sort(train_idx)), **train_kwargs)
            pred[held_out] = EqmModelService.predict_many(model, [data.rows[i].features for i in held_out])
        return cls.correlations(pred, data.mos_vector())

    @classmethod
    def cross_validate(
        cls,
        data: LabeledDataset,
        level: EqmLevel,
        folds: int = EvaluationConstants.DEFAULT_FOLDS,
        reps: int = EvaluationConstants.DEFAULT_REPETITIONS,
        seed: int = 0,
        params_base: ForestParams = ForestParams(),
        params_residual: ForestParams = ForestParams(),
        two_stage: bool = True,
        base_qp: bool = True,
        external_columns: Sequence[str] = (),
        threads: int = 1,
    ) -> EvalReport:
        """
        Repeated k-fold cross-validation

        Each repetition shuffles the rows with its own seeded generator, pools
        the held-out predictions of all folds and computes metrics once.
        The report holds the mean over repetitions plus every repetition.
        """
        if folds < EvaluationConstants.MIN_FOLDS:
            raise ValueError(f"folds must be at least {EvaluationConstants.MIN_FOLDS}")
        if reps < 1:
            raise ValueError("reps must be at least 1")
        if len(data) < folds:
            raise TooFewRowsError(len(data), folds, module="evaluation")

        train_kwargs = {
            "level": level,
            "params_base": params_base,
            "params_residual": params_residual,
            "two_stage": two_stage,
            "base_qp": base_qp,
            "external_columns": list(external_columns),
        }
        logger.info("Cross-validating %s: %d rows, %d folds x %d repetitions", EqmLevel(level).value, len(data), folds, reps)
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            repetitions = list(
                pool.map(lambda rep: cls._run_repetition(data, rep, folds, seed, train_kwargs), range(reps))
            )

        return EvalReport(
            srocc=_bounded(math.fsum(r.srocc for r in repetitions) / reps),
            plcc=_bounded(math.fsum(r.plcc for r in repetitions) / reps),
            krocc=_bounded(math.fsum(r.krocc for r in repetitions) / reps),
            rmse=math.fsum(r.rmse for r in repetitions) / reps,
            n=len(data),
            degenerate=any(r.degenerate for r in repetitions),
            folds=folds,
            repetitions=repetitions,
        )
