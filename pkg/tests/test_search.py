import threading
import time

import pytest

from src.lib.core.errors import ConfigError, DivergenceError
from src.schemas.config import GridSpec, TrainConfig
from src.schemas.reports import EpochRecord, GridCell, TrainHistory
from src.training.runner import CellRunner
from src.training.search import grid_configs, grid_search, select_best


def history_with(mse: float) -> TrainHistory:
    return TrainHistory(
        epochs=[
            EpochRecord(epoch=1, train_loss=1.0, val_mse=mse, val_mae=mse, seconds=0)
        ],
        best_epoch=1,
    )


def cell(index, mse, f=8, a=2):
    return GridCell(
        index=index,
        n_factors=f,
        n_aspects=a,
        learning_rate=1e-3,
        batch_size=100,
        seed=index,
        val_mse=mse,
        best_epoch=1,
    )


def test_grid_configs_order_and_seeds():
    spec = GridSpec(n_factors=[4, 8], n_aspects=[1, 3], learning_rate=[1e-3])
    configs = grid_configs(spec, TrainConfig(seed=10))
    assert len(configs) == spec.size == 4
    assert [(c.n_factors, c.n_preferred) for c in configs] == [
        (4, 1),
        (4, 3),
        (8, 1),
        (8, 3),
    ]
    assert [c.seed for c in configs] == [10, 11, 12, 13]
    assert all(c.n_preferred == c.n_rejected for c in configs)


def test_empty_grid_rejected():
    with pytest.raises(ConfigError):
        grid_configs(GridSpec(n_factors=[]), TrainConfig())


def test_select_best_breaks_ties_by_size():
    cells = [cell(0, 0.9, f=16), cell(1, 0.8, f=16, a=3), cell(2, 0.8, f=8, a=3)]
    assert select_best(cells) == 2
    cells.append(cell(3, 0.8, f=8, a=1))
    assert select_best(cells) == 3


def test_grid_search_picks_lowest_validation_error():
    spec = GridSpec(n_factors=[4, 8, 16], n_aspects=[2])
    scores = {4: 1.2, 8: 0.7, 16: 0.9}

    def trainer(config):
        return history_with(scores[config.n_factors])

    best, report = grid_search(None, spec, TrainConfig(), cell_trainer=trainer)
    assert best.n_factors == 8
    assert report.best_index == 1
    assert [c.val_mse for c in report.cells] == [1.2, 0.7, 0.9]


def test_diverged_cell_is_recorded_as_infinite():
    spec = GridSpec(n_factors=[4, 8], n_aspects=[2])

    def trainer(config):
        if config.n_factors == 4:
            raise DivergenceError(0)
        return history_with(2.0)

    best, report = grid_search(None, spec, TrainConfig(), cell_trainer=trainer)
    assert report.cells[0].val_mse == float("inf")
    assert report.cells[0].best_epoch is None
    assert best.n_factors == 8


def test_parallel_grid_search_keeps_cell_order():
    spec = GridSpec(n_factors=[1, 2, 3, 4], n_aspects=[1])

    def trainer(config):
        time.sleep(0.01 * (5 - config.n_factors))
        return history_with(float(config.n_factors))

    _, report = grid_search(None, spec, TrainConfig(), workers=3, cell_trainer=trainer)
    assert [c.val_mse for c in report.cells] == [1.0, 2.0, 3.0, 4.0]
    assert report.best_index == 0


def test_grid_search_trains_real_cells(toy_corpus, small_config):
    spec = GridSpec(n_factors=[2, 4], n_aspects=[1, 2], batch_size=[8])
    base = small_config.with_overrides(max_epochs=1)
    best, report = grid_search(toy_corpus, spec, base, workers=2)
    assert len(report.cells) == 4
    assert best == grid_configs(spec, base)[report.best_index]


def test_runner_rejects_zero_workers():
    with pytest.raises(ValueError):
        CellRunner(0)


def test_sequential_runner_preserves_order():
    assert CellRunner(1).run(lambda x: x * x, [3, 1, 2]) == [9, 1, 4]


async def test_async_runner_bounds_concurrency():
    active = {"now": 0, "peak": 0}
    lock = threading.Lock()

    def work(x):
        with lock:
            active["now"] += 1
            active["peak"] = max(active["peak"], active["now"])
        time.sleep(0.02)
        with lock:
            active["now"] -= 1
        return x + 1

    results = await CellRunner(2).run_async(work, list(range(6)))
    assert results == [1, 2, 3, 4, 5, 6]
    assert active["peak"] <= 2


async def test_async_runner_propagates_errors():
    def work(x):
        if x == 2:
            raise RuntimeError("cell failed")
        return x

    with pytest.raises(RuntimeError):
        await CellRunner(2).run_async(work, [1, 2, 3])
