"""Biased matrix-factorisation baseline: r_hat = mu + b_u + b_i + p_u . q_i"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from ..corpus import PreparedCorpus
from ..evaluation.metrics import evaluate
from ..kernel import ops
from ..kernel.tape import ArrayLike, Tape, Tensor
from ..lib.core.errors import DivergenceError, UnknownEntityError
from ..model.rpr import RatingBatch
from ..schemas.config import TrainConfig
from ..schemas.reports import EpochRecord, TrainHistory
from .adam import AdamState, adam_step, clip_by_global_norm
from .initialize import xavier_bound
from .trainer import encode_records, iter_batches

logger = logging.getLogger(__name__)


@dataclass
class MFModel:
    arrays: Dict[str, np.ndarray]
    mean: float
    user_index: Mapping[str, int]
    item_index: Mapping[str, int]

    def rating(self, user_id: str, item_id: str) -> float:
        u = self.user_index.get(user_id)
        if u is None:
            raise UnknownEntityError("user", user_id)
        i = self.item_index.get(item_id)
        if i is None:
            raise UnknownEntityError("item", item_id)
        a = self.arrays
        return float(
            self.mean + a["b_u"][u, 0] + a["b_i"][i, 0] + a["P"][u] @ a["Q"][i]
        )

    def copy(self) -> "MFModel":
        return MFModel(
            {k: v.copy() for k, v in self.arrays.items()},
            self.mean,
            self.user_index,
            self.item_index,
        )


def init_baseline(
    n_users: int, n_items: int, n_factors: int, seed: int
) -> Dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    bound = xavier_bound((n_users, n_factors))
    P = rng.uniform(-bound, bound, size=(n_users, n_factors))
    bound = xavier_bound((n_items, n_factors))
    Q = rng.uniform(-bound, bound, size=(n_items, n_factors))
    return {
        "P": P,
        "Q": Q,
        "b_u": np.zeros((n_users, 1)),
        "b_i": np.zeros((n_items, 1)),
    }


def baseline_objective(
    m: Mapping[str, ArrayLike], batch: RatingBatch, mean: float, beta2: float
) -> Tensor:
    p = ops.gather_rows(m["P"], batch.users)
    q = ops.gather_rows(m["Q"], batch.items)
    r_hat = ops.reduce_sum(ops.elementwise_product(p, q), axis=-1)
    r_hat = ops.add(r_hat, ops.reduce_sum(ops.gather_rows(m["b_u"], batch.users), -1))
    r_hat = ops.add(r_hat, ops.reduce_sum(ops.gather_rows(m["b_i"], batch.items), -1))
    residual = ops.sub(batch.ratings - mean, r_hat)
    total = ops.scale(ops.square_sum(residual), 0.5)
    if beta2 > 0:
        users, items = np.unique(batch.users), np.unique(batch.items)
        l2 = ops.add(
            ops.square_sum(ops.gather_rows(m["P"], users)),
            ops.square_sum(ops.gather_rows(m["Q"], items)),
        )
        l2 = ops.add(l2, ops.square_sum(ops.gather_rows(m["b_u"], users)))
        l2 = ops.add(l2, ops.square_sum(ops.gather_rows(m["b_i"], items)))
        total = ops.add(total, ops.scale(l2, beta2 / 2.0))
    return total


def train_baseline(
    corpus: PreparedCorpus, config: TrainConfig
) -> Tuple[MFModel, TrainHistory]:
    """Adam on the same batches, schedule and early stopping as the full model"""
    train_batch = encode_records(
        corpus.split.train, corpus.user_index, corpus.item_index
    )
    mean = float(train_batch.ratings.mean())
    model = MFModel(
        init_baseline(
            len(corpus.user_index),
            len(corpus.item_index),
            config.n_factors,
            config.seed,
        ),
        mean,
        corpus.user_index,
        corpus.item_index,
    )
    state = AdamState(config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    rng = np.random.default_rng(config.seed)
    monitor = corpus.split.validation or corpus.split.train

    history = TrainHistory()
    best, best_mse, stale, batch_index = model.copy(), float("inf"), 0, 0
    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        total = 0.0
        for rows in iter_batches(len(train_batch), config.batch_size, rng):
            tb = train_batch
            batch = RatingBatch(tb.users[rows], tb.items[rows], tb.ratings[rows])
            tape = Tape()
            tracked = {k: tape.watch(k, v) for k, v in model.arrays.items()}
            value = baseline_objective(tracked, batch, mean, config.beta2)
            if not np.isfinite(value.item()):
                raise DivergenceError(batch_index, params=None, history=history)
            grads = tape.gradients(value)
            clip_by_global_norm(grads, config.clip_norm)
            adam_step(model.arrays, grads, state, config.learning_rate, batch_index)
            total += value.item()
            batch_index += 1

        report = evaluate(model, monitor)
        history.epochs.append(
            EpochRecord(
                epoch=epoch,
                train_loss=total / len(train_batch),
                val_mse=report.mse,
                val_mae=report.mae,
                seconds=time.perf_counter() - started,
            )
        )
        if report.mse < best_mse:
            best, best_mse, stale = model.copy(), report.mse, 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= config.patience:
                history.stopped_early = True
                break

    logger.info(f"MF baseline best epoch {history.best_epoch} (val_mse={best_mse:.5f})")
    return best, history
