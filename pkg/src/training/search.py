"""Validation-driven grid search over model and optimiser settings"""

from __future__ import annotations

import itertools
import logging
from typing import Callable, List, Optional, Tuple

from ..corpus import PreparedCorpus
from ..lib.core.errors import ConfigError, DivergenceError
from ..schemas.config import GridSpec, TrainConfig
from ..schemas.reports import GridCell, GridReport, TrainHistory
from .runner import CellRunner
from .trainer import train

logger = logging.getLogger(__name__)

CellTrainer = Callable[[TrainConfig], TrainHistory]


def grid_configs(spec: GridSpec, base: TrainConfig) -> List[TrainConfig]:
    """
    One config per grid cell, in axis order f, aspects, lr, batch size.

    Cell k is seeded with ``base.seed + k``.
    """
    if spec.size == 0:
        raise ConfigError("grid has no cells")
    cells = itertools.product(
        spec.n_factors, spec.n_aspects, spec.learning_rate, spec.batch_size
    )
    return [
        base.with_overrides(
            n_factors=f,
            n_preferred=a,
            n_rejected=a,
            learning_rate=lr,
            batch_size=bs,
            seed=base.seed + k,
        )
        for k, (f, a, lr, bs) in enumerate(cells)
    ]


def select_best(cells: List[GridCell]) -> int:
    """Minimal validation MSE; ties go to smaller f, then fewer aspects"""
    best = min(cells, key=lambda c: (c.val_mse, c.n_factors, c.n_aspects, c.index))
    return best.index


def grid_search(
    corpus: PreparedCorpus,
    spec: GridSpec,
    base: TrainConfig,
    workers: int = 1,
    cell_trainer: Optional[CellTrainer] = None,
) -> Tuple[TrainConfig, GridReport]:
    """
    Train every cell and pick the best by validation MSE.

    A diverged cell is recorded with an infinite validation MSE.
    """
    configs = grid_configs(spec, base)
    logger.info(f"Grid search over {len(configs)} cells with {workers} workers")

    def run_cell(config: TrainConfig) -> TrainHistory:
        if cell_trainer is not None:
            return cell_trainer(config)
        return train(corpus, config)[1]

    def guarded(config: TrainConfig) -> Optional[TrainHistory]:
        try:
            return run_cell(config)
        except DivergenceError as e:
            logger.warning(f"cell seed={config.seed} diverged: {e}")
            return None

    histories = CellRunner(workers).run(guarded, configs)

    cells = []
    for k, (config, history) in enumerate(zip(configs, histories)):
        cells.append(
            GridCell(
                index=k,
                n_factors=config.n_factors,
                n_aspects=config.n_preferred,
                learning_rate=config.learning_rate,
                batch_size=config.batch_size,
                seed=config.seed,
                val_mse=history.best_val_mse if history else float("inf"),
                best_epoch=history.best_epoch if history else None,
            )
        )
    best_index = select_best(cells)
    logger.info(
        f"Best cell {best_index}: val_mse={cells[best_index].val_mse:.5f}"
    )
    return configs[best_index], GridReport(cells=cells, best_index=best_index)
