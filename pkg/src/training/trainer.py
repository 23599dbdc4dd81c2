"""
Mini-batch training loop.

Each batch runs one forward/backward pass and then steps the four update
groups in order (users, items, indicators, remaining) on that batch's
gradients. Validation MSE is measured after every epoch and the best
parameters are kept.
"""

from __future__ import annotations

import logging
import time
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..corpus import PreparedCorpus
from ..evaluation.metrics import evaluate
from ..lib.core.errors import DivergenceError, UnknownEntityError
from ..model.params import GROUP_ORDER, ModelParams
from ..model.rpr import DocumentTable, RatingBatch, RPRModel, forward_backward
from ..model.wiring import VariantWiring
from ..schemas.config import TrainConfig
from ..schemas.records import InteractionRecord
from ..schemas.reports import EpochRecord, TrainHistory
from .adam import AdamState, adam_step, clip_by_global_norm
from .initialize import init_params
from .variants import make_variant, variant_documents

logger = logging.getLogger(__name__)


def encode_records(
    records: Sequence[InteractionRecord],
    user_index: Mapping[str, int],
    item_index: Mapping[str, int],
) -> RatingBatch:
    """Map records onto dense user/item rows"""
    users = np.empty(len(records), dtype=np.int64)
    items = np.empty(len(records), dtype=np.int64)
    for k, rec in enumerate(records):
        if rec.user_id not in user_index:
            raise UnknownEntityError("user", rec.user_id)
        if rec.item_id not in item_index:
            raise UnknownEntityError("item", rec.item_id)
        users[k] = user_index[rec.user_id]
        items[k] = item_index[rec.item_id]
    ratings = np.array([r.rating for r in records], dtype=np.float64)
    return RatingBatch(users=users, items=items, ratings=ratings)


def iter_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


class Trainer:
    """
    Owns the parameters and optimiser state of one training run.

    Args:
        corpus: Prepared training corpus
        config: Hyper-parameters
        params: Starting parameters, freshly initialised when omitted
    """

    def __init__(
        self,
        corpus: PreparedCorpus,
        config: TrainConfig,
        params: Optional[ModelParams] = None,
    ):
        self.corpus = corpus
        self.config = config
        self.wiring: VariantWiring = make_variant(config)
        self.documents: DocumentTable = variant_documents(corpus, self.wiring)
        self.params = params or init_params(
            config,
            corpus.vocab,
            corpus.embeddings,
            len(corpus.user_index),
            len(corpus.item_index),
            config.seed,
        )
        self.states: Dict[str, AdamState] = {
            group: AdamState(
                beta1=config.adam_beta1,
                beta2=config.adam_beta2,
                epsilon=config.adam_epsilon,
            )
            for group in GROUP_ORDER
        }
        self.train_batch = encode_records(
            corpus.split.train, corpus.user_index, corpus.item_index
        )
        shuffle_seq, dropout_seq = np.random.SeedSequence(config.seed).spawn(2)
        self._shuffle_rng = np.random.default_rng(shuffle_seq)
        self._dropout_rng = np.random.default_rng(dropout_seq)
        self._batch_index = 0

    @property
    def dropout_rate(self) -> float:
        return self.config.dropout if self.config.use_dropout else 0.0

    def model(self, params: Optional[ModelParams] = None) -> RPRModel:
        return RPRModel(
            params or self.params,
            self.documents,
            self.corpus.user_index,
            self.corpus.item_index,
            self.wiring,
        )

    def _group_arrays(self, group: str) -> Dict[str, np.ndarray]:
        arrays = self.params.group(group)
        if not self.params.trainable_embeddings:
            arrays.pop("embeddings", None)
        return arrays

    def step(self, rows: np.ndarray, groups: Sequence[str] = GROUP_ORDER) -> float:
        """One batch: forward/backward, clip, then Adam on each group in order"""
        tb = self.train_batch
        batch = RatingBatch(tb.users[rows], tb.items[rows], tb.ratings[rows])
        value, grads = forward_backward(
            batch,
            self.params,
            self.config.reg,
            self.documents,
            self.wiring,
            self.dropout_rate,
            self._dropout_rng,
            batch_index=self._batch_index,
        )
        if not self.params.trainable_embeddings:
            grads.pop("embeddings")
        norm = clip_by_global_norm(grads, self.config.clip_norm)
        logger.debug(f"batch {self._batch_index}: loss={value:.6f} |g|={norm:.4f}")

        for group in groups:
            adam_step(
                self._group_arrays(group),
                grads,
                self.states[group],
                self.config.learning_rate,
                self._batch_index,
            )
        self._batch_index += 1
        return value

    def run_epoch(self, epoch: int) -> float:
        """Mean objective per training record over one pass"""
        groups: Sequence[str] = GROUP_ORDER
        if self.config.epoch_schedule:
            groups = (GROUP_ORDER[(epoch - 1) % len(GROUP_ORDER)],)
        total = 0.0
        for rows in iter_batches(
            len(self.train_batch), self.config.batch_size, self._shuffle_rng
        ):
            total += self.step(rows, groups)
        return total / len(self.train_batch)

    def fit(self) -> Tuple[ModelParams, TrainHistory]:
        """
        Train until max_epochs or patience runs out.

        Raises:
            DivergenceError: carrying the best parameters and history so far
        """
        config = self.config
        history = TrainHistory()
        best = self.params.copy()
        best_mse = float("inf")
        stale = 0
        # tiny corpora can leave the validation partition empty
        monitor = self.corpus.split.validation or self.corpus.split.train
        if not self.corpus.split.validation:
            logger.warning("Validation split is empty, monitoring the train split")

        for epoch in range(1, config.max_epochs + 1):
            started = time.perf_counter()
            try:
                train_loss = self.run_epoch(epoch)
            except DivergenceError as e:
                logger.error(f"Training diverged in epoch {epoch}: {e}")
                e.params, e.history = best, history
                raise

            report = evaluate(self.model(), monitor)
            history.epochs.append(
                EpochRecord(
                    epoch=epoch,
                    train_loss=train_loss,
                    val_mse=report.mse,
                    val_mae=report.mae,
                    seconds=time.perf_counter() - started,
                )
            )
            logger.info(
                f"epoch {epoch}: train_loss={train_loss:.5f} "
                f"val_mse={report.mse:.5f} val_mae={report.mae:.5f}"
            )

            if report.mse < best_mse:
                best_mse = report.mse
                best = self.params.copy()
                history.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    history.stopped_early = True
                    logger.warning(
                        f"Early stop at epoch {epoch}: no improvement for "
                        f"{config.patience} epochs"
                    )
                    break

        logger.info(f"Best epoch {history.best_epoch} (val_mse={best_mse:.5f})")
        return best, history


def train(
    corpus: PreparedCorpus,
    config: TrainConfig,
    params: Optional[ModelParams] = None,
) -> Tuple[ModelParams, TrainHistory]:
    return Trainer(corpus, config, params).fit()
