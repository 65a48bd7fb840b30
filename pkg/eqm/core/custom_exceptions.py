"""
Custom exceptions for the EQM toolkit

Every error carries a module-qualified code (``<module>.<Name>``) that the CLI
prints in its machine-readable error line.
"""
from typing import Optional


class EqmException(Exception):
    """Base exception for the EQM toolkit"""

    module: str = "eqm"

    def __init__(self, message: str, error_code: Optional[str] = None):
        self.message = message
        self.error_code = error_code or f"{self.module}.{type(self).__name__.removesuffix('Error')}"
        super().__init__(self.message)


# ── Configuration ──────────────────────────────────────────────────────────────

class ConfigVersionError(EqmException):
    """Raised when a config file declares an unsupported config_version"""
    module = "config"


# ── HEVC metadata ──────────────────────────────────────────────────────────────

class HevcMetaError(EqmException):
    """Base class for bitstream metadata errors"""
    module = "hevc_meta"


class NoStartCodeError(HevcMetaError):
    """Raised when a stream carries no Annex-B start code"""
    pass


class TruncatedUnitError(HevcMetaError):
    """Raised when a NAL unit ends before its header is complete"""
    pass


class MalformedSpsError(HevcMetaError):
    """Raised when SPS syntax is exhausted early or out of range"""
    pass


class BitstreamExhaustedError(HevcMetaError):
    """Raised when a bit reader runs past the end of its payload"""
    pass


class NoSpsError(HevcMetaError):
    """Raised when a stream has no sequence parameter set"""
    pass


class MissingFrameRateError(HevcMetaError):
    """Raised when neither VUI timing nor an override provides the frame rate"""
    pass


class InvalidDurationError(HevcMetaError):
    """Raised when the stream duration is missing, zero or negative"""
    pass


# ── Trace ingestion ────────────────────────────────────────────────────────────

class TraceSyntaxError(EqmException):
    """Raised when a trace line is not a well-formed frame object"""
    module = "trace"

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}", error_code="trace.SyntaxError")


class TraceInvariantError(EqmException):
    """Raised when a parsed frame breaks a trace invariant"""
    module = "trace"

    def __init__(self, line: int, reason: str, field: Optional[str] = None):
        self.line = line
        self.reason = reason
        self.field = field
        where = f" ({field})" if field else ""
        super().__init__(f"line {line}{where}: {reason}", error_code="trace.InvariantViolation")


# ── Frame features ─────────────────────────────────────────────────────────────

class FrameFeatureError(EqmException):
    """Base class for frame feature errors"""
    module = "frame_features"


class ZeroRefDistanceError(FrameFeatureError):
    """Raised when a motion vector references its own picture"""
    pass


class NoMotionBlocksError(FrameFeatureError):
    """Raised when a frame has no MV-bearing block"""
    pass


class EmptyGlobalSetError(FrameFeatureError):
    """Raised when the global angle is requested for an empty bin set"""
    pass


# ── Pooling ────────────────────────────────────────────────────────────────────

class PoolingError(EqmException):
    """Base class for pooling errors"""
    module = "pooling"


class EmptyInputError(PoolingError):
    """Raised when a statistic or pooling step receives no values"""
    pass


class SchemaMismatchError(PoolingError):
    """Raised when segments to average disagree on keys or metadata"""
    pass


# ── Forest ─────────────────────────────────────────────────────────────────────

class ForestError(EqmException):
    """Base class for random forest errors"""
    module = "forest"


class DimensionMismatchError(ForestError):
    """Raised when matrix, target or vector shapes disagree"""
    pass


class NonFiniteInputError(ForestError):
    """Raised when training or prediction input contains NaN or inf"""
    pass


# ── Two-stage model ────────────────────────────────────────────────────────────

class EqmModelError(EqmException):
    """Base class for model errors"""
    module = "eqm_model"


class MissingColumnsError(EqmModelError):
    """Raised when required feature columns are absent"""

    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"Required feature columns missing: {', '.join(missing)}")


class TooFewRowsError(EqmException):
    """Raised when a dataset is too small for training or cross-validation"""

    def __init__(self, rows: int, required: int, module: str = "eqm_model"):
        self.rows = rows
        self.required = required
        super().__init__(
            f"Dataset has {rows} rows, at least {required} required",
            error_code=f"{module}.TooFewRows",
        )


class VersionMismatchError(EqmModelError):
    """Raised when a model file was written by an incompatible version"""

    def __init__(self, found: int, expected: int):
        self.found = found
        self.expected = expected
        super().__init__(f"Model file version {found} is not supported (expected {expected})")


class CorruptModelError(EqmModelError):
    """Raised when a model file is truncated or fails its checksum"""
    pass


# ── Fusion ─────────────────────────────────────────────────────────────────────

class FusionError(EqmException):
    """Base class for dataset fusion errors"""
    module = "fusion"


class DegenerateAnchorsError(FusionError):
    """Raised when all anchor source scores are identical"""
    pass


class TooFewAnchorsError(FusionError):
    """Raised when fewer than two anchor pairs are supplied"""
    pass


class DuplicateVideoIdError(FusionError):
    """Raised when a video id appears in more than one study or twice in one table"""

    def __init__(self, video_id: str, where: Optional[str] = None):
        self.video_id = video_id
        self.where = where
        if where is None:
            super().__init__(f"Video id {video_id!r} appears in more than one dataset")
        else:
            super().__init__(f"Video id {video_id!r} appears more than once in {where}")


# ── Tables ─────────────────────────────────────────────────────────────────────

class InvalidValueError(EqmException):
    """Raised when a table cell that must be numeric is blank or not a number"""
    module = "dataset"

    def __init__(self, where: str, column: str, video_id: str):
        self.column = column
        self.video_id = video_id
        super().__init__(f"{where}: column '{column}' of video {video_id!r} is not a number")


# ── Evaluation ─────────────────────────────────────────────────────────────────

class EvaluationError(EqmException):
    """Base class for evaluation errors"""
    module = "evaluation"


class LengthMismatchError(EvaluationError):
    """Raised when prediction and truth vectors differ in length"""
    pass


class TooFewSamplesError(EvaluationError):
    """Raised when fewer samples than a correlation needs are supplied"""
    pass


class NonFiniteScoresError(EvaluationError):
    """Raised when a prediction or truth vector holds NaN or infinite values"""
    pass


# ── CLI ────────────────────────────────────────────────────────────────────────

class UsageError(EqmException):
    """Raised on invalid command line usage"""
    module = "cli"
