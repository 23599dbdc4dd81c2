"""Rating-prediction error metrics and their rendering"""

from __future__ import annotations

import logging
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from rich.table import Table

from ..lib.core.errors import UnknownEntityError
from ..schemas.records import MAX_RATING, MIN_RATING, InteractionRecord
from ..schemas.reports import MetricsReport

logger = logging.getLogger(__name__)

METRICS_HEADER = ("label", "mse", "mae", "n", "n_fallback")


class RatingPredictor(Protocol):
    def rating(self, user_id: str, item_id: str) -> float: ...


def predict_records(
    model: RatingPredictor,
    records: Sequence[InteractionRecord],
    clip: bool = False,
    fallback_mean: Optional[float] = None,
) -> Tuple[np.ndarray, int]:
    """
    Predicted rating of every record, plus the number served by the fallback.

    Without ``fallback_mean`` an unseen user or item raises
    UnknownEntityError.
    """
    warm = getattr(model, "warm", None)
    if warm is not None:
        warm({rec.user_id for rec in records})
    preds = np.empty(len(records), dtype=np.float64)
    n_fallback = 0
    for k, rec in enumerate(records):
        try:
            preds[k] = model.rating(rec.user_id, rec.item_id)
        except UnknownEntityError:
            if fallback_mean is None:
                raise
            preds[k] = fallback_mean
            n_fallback += 1
    if clip:
        np.clip(preds, MIN_RATING, MAX_RATING, out=preds)
    if n_fallback:
        logger.warning(f"{n_fallback} predictions fell back to the mean rating")
    return preds, n_fallback


def error_metrics(ratings: np.ndarray, preds: np.ndarray) -> Tuple[float, float]:
    """(MSE, MAE)"""
    residual = np.asarray(ratings, dtype=np.float64) - preds
    return float(np.mean(residual * residual)), float(np.mean(np.abs(residual)))


def evaluate(
    model: RatingPredictor,
    records: Sequence[InteractionRecord],
    clip: bool = False,
    fallback_mean: Optional[float] = None,
    label: str = "",
) -> MetricsReport:
    if not records:
        raise ValueError("cannot evaluate an empty record list")
    preds, n_fallback = predict_records(model, records, clip, fallback_mean)
    mse, mae = error_metrics(np.array([r.rating for r in records]), preds)
    return MetricsReport(
        mse=mse, mae=mae, n=len(records), n_fallback=n_fallback, label=label
    )


def metrics_rows(reports: Sequence[MetricsReport]) -> List[List[str]]:
    """Comma-separated rows, header first"""
    rows = [list(METRICS_HEADER)]
    for r in reports:
        rows.append([r.label, repr(r.mse), repr(r.mae), str(r.n), str(r.n_fallback)])
    return rows


def render_metrics_table(
    reports: Sequence[MetricsReport], title: str = "Rating prediction"
) -> Table:
    table = Table(title=title)
    table.add_column("Model", style="bold cyan")
    table.add_column("MSE", justify="right", style="green")
    table.add_column("MAE", justify="right", style="yellow")
    table.add_column("Records", justify="right")
    for r in reports:
        table.add_row(r.label or "-", f"{r.mse:.4f}", f"{r.mae:.4f}", str(r.n))
    return table
