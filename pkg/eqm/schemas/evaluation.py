from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class CorrelationMetrics(BaseModel):
    """SROCC / PLCC / KROCC / RMSE of one prediction vector against the truth"""

    model_config = ConfigDict(frozen=True)

    srocc: float = Field(..., ge=-1, le=1)
    plcc: float = Field(..., ge=-1, le=1)
    krocc: float = Field(..., ge=-1, le=1)
    rmse: float = Field(..., ge=0)
    n: int = Field(..., ge=1)
    degenerate: bool = Field(default=False, description="A zero-variance input forced correlations to 0")


class EvalReport(CorrelationMetrics):
    """Metrics, averaged over repetitions when produced by cross-validation"""

    folds: Optional[int] = None
    repetitions: list[CorrelationMetrics] = Field(default_factory=list)
