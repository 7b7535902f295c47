import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


class ScoredItem(BaseModel):
    """
    Model for one scored eval image
    """

    score: float = Field(ge=0.0, le=1.0, description="Fake probability")
    label: int = Field(ge=0, le=1, description="0 = real, 1 = fake")
    source_id: int = Field(description="Stable id used to break score ties")

    @field_validator("score")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("score must be finite")
        return value


class MetricsRow(BaseModel):
    """
    Model for the metrics of one eval dataset
    """

    dataset: str = Field(description="Eval dataset name")
    family: str = Field(description="Generator family of the fake half")
    n_real: int = Field(ge=0)
    n_fake: int = Field(ge=0)
    ap: float = Field(ge=0.0, le=1.0, description="Average precision")
    acc: float = Field(ge=0.0, le=1.0, description="Accuracy at threshold 0.5")


class RunMetadata(BaseModel):
    """
    Model for the run identity attached to every report
    """

    strategy: str = Field(description="Strategy kind, or 'zero_shot'")
    seed: int = Field(description="Training seed")
    config_digest: str = Field(description="SHA-256 of the canonical experiment config")
    train_size: Optional[int] = Field(default=None, description="Train samples used")
    extra: Dict[str, str] = Field(default_factory=dict, description="Free-form run annotations")


class MetricsReport(BaseModel):
    """
    Model for per-dataset AP/accuracy rows plus aggregates
    """

    rows: List[MetricsRow] = Field(description="One row per eval dataset")
    map: float = Field(description="Mean of row APs")
    mean_acc: float = Field(description="Mean of row accuracies")
    metadata: RunMetadata = Field(description="Run identity")


class SweepCell(BaseModel):
    """
    Model for one (perturbation, parameter, family) cell of a robustness sweep
    """

    perturbation: str = Field(description="'identity', 'jpeg' or 'blur'")
    parameter: Optional[float] = Field(default=None, description="JPEG quality or blur sigma")
    family: str = Field(description="Eval family")
    ap: Optional[float] = Field(default=None, description="AP, None when the cell failed")
    acc: Optional[float] = Field(default=None, description="Accuracy, None when the cell failed")
    error: Optional[str] = Field(default=None, description="Error message of a failed cell")

    @property
    def key(self) -> tuple:
        return (self.perturbation, -1.0 if self.parameter is None else self.parameter, self.family)


class SweepResult(BaseModel):
    """
    Model for a full robustness grid
    """

    cells: List[SweepCell] = Field(description="Cells in deterministic grid order")
    metadata: RunMetadata = Field(description="Run identity")

    def cell(self, perturbation: str, parameter: Optional[float], family: str) -> SweepCell:
        wanted = SweepCell(perturbation=perturbation, parameter=parameter, family=family).key
        for cell in self.cells:
            if cell.key == wanted:
                return cell
        raise KeyError((perturbation, parameter, family))
