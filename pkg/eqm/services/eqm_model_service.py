"""
Service layer for the two-stage EQM quality model
Base forest on metadata (+ mean QP), residual forest on base output plus the
full feature set, and the versioned single-file model format
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from ..constants import ModelConstants, PoolingConstants
from ..core.custom_exceptions import (
    CorruptModelError,
    MissingColumnsError,
    NonFiniteInputError,
    TooFewRowsError,
    VersionMismatchError,
)
from ..schemas.dataset import LabeledDataset
from ..schemas.forest import Forest, ForestParams
from ..schemas.model import EqmLevel, EqmModel
from ..schemas.trace import NormConfig
from . import forest_service


logger = logging.getLogger(__name__)


class EqmModelService:
    """Training, prediction and persistence of EQM models"""

    @staticmethod
    def encode_value(
        key: str,
        value,
        codec_dictionary: Mapping[str, int],
        pixel_format_dictionary: Mapping[str, int],
    ) -> float:
        """Numeric encoding of one feature value; categorical keys go through their dictionary."""
        if key == PoolingConstants.META_CODEC or key == PoolingConstants.META_PIXEL_FORMAT:
            dictionary = codec_dictionary if key == PoolingConstants.META_CODEC else pixel_format_dictionary
            code = dictionary.get(str(value))
            if code is None:
                logger.warning("Unknown %s value '%s'; encoded as %d", key, value, ModelConstants.UNKNOWN_CATEGORY_CODE)
                return float(ModelConstants.UNKNOWN_CATEGORY_CODE)
            return float(code)
        try:
            number = float(value)
        except (TypeError, ValueError) as exc:
            raise NonFiniteInputError(f"Feature '{key}' is not numeric: {value!r}") from exc
        if not np.isfinite(number):
            raise NonFiniteInputError(f"Feature '{key}' is not finite")
        return number

    @classmethod
    def feature_matrix(
        cls,
        rows: Sequence[Mapping],
        keys: Sequence[str],
        codec_dictionary: Mapping[str, int] = ModelConstants.CODEC_DICTIONARY,
        pixel_format_dictionary: Mapping[str, int] = ModelConstants.PIXEL_FORMAT_DICTIONARY,
    ) -> np.ndarray:
        """Row-major matrix of ``keys``; raises MissingColumns naming every absent key."""
        missing = sorted({key for row in rows for key in keys if key not in row})
        if missing:
            raise MissingColumnsError(missing)
        matrix = np.empty((len(rows), len(keys)), dtype=np.float64)
        for i, row in enumerate(rows):
            for j, key in enumerate(keys):
                matrix[i, j] = cls.encode_value(key, row[key], codec_dictionary, pixel_format_dictionary)
        return matrix

    @staticmethod
    def base_keys(base_qp: bool) -> list[str]:
        keys = list(PoolingConstants.METADATA_KEYS)
        if base_qp:
            keys.append(ModelConstants.BASE_QP_KEY)
        return keys

    @staticmethod
    def full_keys(external_columns: Sequence[str]) -> list[str]:
        """Metadata, pooled EQM keys and external columns, without the base output."""
        return list(PoolingConstants.METADATA_KEYS) + list(PoolingConstants.EQM_KEYS) + list(external_columns)

    @staticmethod
    def resolve_external_columns(data: LabeledDataset, level: EqmLevel, external_columns: Sequence[str]) -> list[str]:
        if level != EqmLevel.FR:
            return []
        columns = list(external_columns)
        if not columns:
            known = set(PoolingConstants.FEATURE_COLUMNS)
            columns = [key for key in data.feature_keys if key not in known]
        if not columns:
            raise MissingColumnsError(["<external columns>"])
        return columns

    @staticmethod
    def _oob_with_fallback(forest: Forest, matrix: np.ndarray) -> np.ndarray:
        predictions = forest_service.oob_predict(forest, matrix)
        uncovered = np.isnan(predictions)
        if np.any(uncovered):
            logger.warning(
                "%d training row(s) were never out-of-bag; using full base predictions for them",
                int(uncovered.sum()),
            )
            predictions[uncovered] = forest_service.predict_many(forest, matrix[uncovered])
        return predictions

    @classmethod
    def train_eqm(
        cls,
        data: LabeledDataset,
        level: EqmLevel,
        params_base: ForestParams,
        params_residual: ForestParams,
        two_stage: bool = True,
        base_qp: bool = True,
        external_columns: Sequence[str] = (),
        norm_config: Optional[NormConfig] = None,
        threads: int = 1,
    ) -> EqmModel:
        """
        Train an EQM model

        Args:
            data: Labeled rows (segment feature columns, external columns, mos)
            level: metadata / metadata_qp use one forest; nr / fr use two stages
            params_base: Forest parameters of the base (or only metadata) forest
            params_residual: Forest parameters of the residual (or only EQM) forest
            two_stage: False trains one forest on the full feature set
            base_qp: Whether the base forest sees mean_avgQP
            external_columns: FR pixel-feature columns; inferred from the data when empty

        Returns:
            The trained, immutable model
        """
        if len(data) < ModelConstants.MIN_TRAINING_ROWS:
            raise TooFewRowsError(len(data), ModelConstants.MIN_TRAINING_ROWS)

        level = EqmLevel(level)
        externals = cls.resolve_external_columns(data, level, external_columns)
        rows = [row.features for row in data.rows]
        mos = data.mos_vector()
        common = {
            "level": level,
            "base_qp": base_qp,
            "norm_config": norm_config or NormConfig(),
            "external_columns": externals,
        }

        if level in (EqmLevel.METADATA, EqmLevel.METADATA_QP):
            keys = cls.base_keys(level == EqmLevel.METADATA_QP)
            forest = forest_service.fit_forest(cls.feature_matrix(rows, keys), mos, params_base, keys, threads)
            logger.info("Trained %s model on %d rows", level.value, len(data))
            return EqmModel(two_stage=False, residual_feature_keys=keys, residual=forest, **common)

        full_keys = cls.full_keys(externals)
        full_matrix = cls.feature_matrix(rows, full_keys)
        if not two_stage:
            forest = forest_service.fit_forest(full_matrix, mos, params_residual, full_keys, threads)
            logger.info("Trained single-forest %s model on %d rows", level.value, len(data))
            return EqmModel(two_stage=False, residual_feature_keys=full_keys, residual=forest, **common)

        base_keys = cls.base_keys(base_qp)
        base_matrix = cls.feature_matrix(rows, base_keys)
        base = forest_service.fit_forest(base_matrix, mos, params_base, base_keys, threads)
        base_output = cls._oob_with_fallback(base, base_matrix)

        residual_keys = [ModelConstants.BASE_OUTPUT_KEY] + full_keys
        residual_matrix = np.column_stack([base_output, full_matrix])
        residual_target = mos - base_output
        residual = forest_service.fit_forest(residual_matrix, residual_target, params_residual, residual_keys, threads)
        logger.info(
            "Trained two-stage %s model on %d rows (mean OOB residual %.4f)",
            level.value, len(data), float(residual_target.mean()),
        )
        return EqmModel(
            two_stage=True,
            base_feature_keys=base_keys,
            residual_feature_keys=residual_keys,
            base=base,
            residual=residual,
            **common,
        )

    @classmethod
    def predict_many(cls, model: EqmModel, rows: Sequence[Mapping]) -> np.ndarray:
        """Clamped scores for many feature rows."""
        dictionaries = (model.codec_dictionary, model.pixel_format_dictionary)
        if model.base is None:
            matrix = cls.feature_matrix(rows, model.residual_feature_keys, *dictionaries)
            raw = forest_service.predict_many(model.residual, matrix)
        else:
            base_output = forest_service.predict_many(
                model.base, cls.feature_matrix(rows, model.base_feature_keys, *dictionaries)
            )
            rest = cls.feature_matrix(rows, model.residual_feature_keys[1:], *dictionaries)
            raw = base_output + forest_service.predict_many(model.residual, np.column_stack([base_output, rest]))
        return np.clip(raw, ModelConstants.MIN_SCORE, ModelConstants.MAX_SCORE)

    @classmethod
    def predict_eqm(cls, model: EqmModel, features: Mapping) -> float:
        return float(cls.predict_many(model, [features])[0])

    @staticmethod
    def dumps(model: EqmModel) -> str:
        """Two LF-terminated lines: an envelope (format, version, payload sha256) and the payload."""
        payload = model.model_dump_json()
        envelope = {
            "format": ModelConstants.MODEL_FILE_FORMAT,
            "version": model.version,
            "sha256": hashlib.sha256(payload.encode("utf-8")).hexdigest(),
        }
        return json.dumps(envelope, sort_keys=True) + "\n" + payload + "\n"

    @staticmethod
    def loads(text: str) -> EqmModel:
        lines = text.split("\n")
        try:
            envelope = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise CorruptModelError(f"Model header is not valid JSON: {exc.msg}") from exc
        if not isinstance(envelope, dict) or envelope.get("format") != ModelConstants.MODEL_FILE_FORMAT:
            raise CorruptModelError("Not an EQM model file")
        if envelope.get("version") != ModelConstants.MODEL_FILE_VERSION:
            raise VersionMismatchError(envelope.get("version"), ModelConstants.MODEL_FILE_VERSION)

        payload = lines[1] if len(lines) > 1 else ""
        if hashlib.sha256(payload.encode("utf-8")).hexdigest() != envelope.get("sha256"):
            raise CorruptModelError("Model payload checksum mismatch (truncated or edited file)")
        try:
            return EqmModel.model_validate_json(payload)
        except ValidationError as exc:
            raise CorruptModelError(f"Model payload is invalid: {exc.error_count()} error(s)") from exc

    @classmethod
    def save_model(cls, model: EqmModel, path: Path) -> Path:
        path = Path(path)
        path.write_text(cls.dumps(model), encoding="utf-8", newline="\n")
        logger.info("Saved %s model to %s", model.level.value, path)
        return path

    @classmethod
    def load_model(cls, path: Path) -> EqmModel:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptModelError(f"Model file {path} is not UTF-8 text") from exc
        return cls.loads(text)
