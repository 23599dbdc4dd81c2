"""Report schemas emitted by training, evaluation and the CLI"""

from __future__ import annotations

from datetime import datetime
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

HISTORY_HEADER = ("epoch", "train_loss", "val_mse", "val_mae", "seconds")


class EpochRecord(BaseModel):
    """Metrics of one training epoch"""

    epoch: int = Field(description="1-based epoch index")
    train_loss: float = Field(description="Mean objective per record")
    val_mse: float
    val_mae: float
    seconds: float = Field(description="Wall time of the epoch")


class TrainHistory(BaseModel):
    """Per-epoch history of one training run"""

    epochs: List[EpochRecord] = Field(default_factory=list)
    best_epoch: Optional[int] = Field(
        default=None, description="Epoch whose parameters were kept"
    )
    stopped_early: bool = False

    @property
    def best_val_mse(self) -> float:
        if self.best_epoch is None:
            return float("inf")
        return self.epochs[self.best_epoch - 1].val_mse

    def to_rows(self) -> List[List[str]]:
        """Comma-separated rows, header first"""
        rows = [list(HISTORY_HEADER)]
        for rec in self.epochs:
            rows.append(
                [
                    str(rec.epoch),
                    repr(rec.train_loss),
                    repr(rec.val_mse),
                    repr(rec.val_mae),
                    f"{rec.seconds:.3f}",
                ]
            )
        return rows


class MetricsReport(BaseModel):
    """Rating-prediction error over one record list"""

    mse: float = Field(ge=0.0)
    mae: float = Field(ge=0.0)
    n: int = Field(ge=0)
    n_fallback: int = Field(
        default=0, description="Predictions served by the fallback mean"
    )
    label: str = Field(default="", description="Model or variant name")


class AspectRow(BaseModel):
    """One aspect line of an explanation table"""

    aspect: int
    importance: float
    score: float
    contribution: float


class ExplanationReport(BaseModel):
    """Why the model predicts a rating for one (user, item) pair"""

    user_id: str
    item_id: str
    preferred: List[AspectRow]
    rejected: List[AspectRow]
    predicted_rating: float
    positive_term: float
    negative_term: float


class GridCell(BaseModel):
    """One trained cell of a hyper-parameter grid"""

    index: int
    n_factors: int
    n_aspects: int
    learning_rate: float
    batch_size: int
    seed: int
    val_mse: float
    best_epoch: Optional[int]


class GridReport(BaseModel):
    cells: List[GridCell]
    best_index: int


class GradCheckReport(BaseModel):
    """Analytic versus finite-difference gradient comparison"""

    max_relative_error: float
    max_absolute_error: float
    max_checked_relative_error: float = Field(
        default=0.0,
        description="Max relative error over coordinates not exempted by atol",
    )
    worst_parameter: str
    worst_index: List[int]
    n_coordinates: int
    passed: bool
    per_parameter: Dict[str, float] = Field(
        default_factory=dict, description="Max relative error per parameter"
    )


class RunManifest(BaseModel):
    """Everything needed to reproduce an artifact directory"""

    command: str
    config: Dict[str, object] = Field(default_factory=dict)
    seeds: List[int] = Field(default_factory=list)
    input_digests: Dict[str, str] = Field(default_factory=dict)
    tool_version: str
    started_at: datetime
    finished_at: Optional[datetime] = None
