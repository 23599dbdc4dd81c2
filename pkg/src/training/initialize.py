"""Parameter initialisation"""

from __future__ import annotations

import logging
from typing import Dict, Tuple

import numpy as np

from ..corpus.embeddings import EmbeddingTable
from ..corpus.text import Vocabulary
from ..lib.core.errors import ConfigError
from ..model.params import ModelDims, ModelParams
from ..schemas.config import TrainConfig

logger = logging.getLogger(__name__)

_BIASES = ("conv.b", "head_p.b", "head_r.b", "att.b")


def xavier_bound(shape: Tuple[int, ...]) -> float:
    """
    sqrt(6 / (fan_in + fan_out)).

    A (n_f, c, d) filter bank has fan_in c*d and fan_out n_f; a vector is
    treated as a single-column matrix.
    """
    if len(shape) == 3:
        fan_out, fan_in = shape[0], shape[1] * shape[2]
    elif len(shape) == 2:
        fan_out, fan_in = shape
    else:
        fan_out, fan_in = shape[0], 1
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def model_dims(
    config: TrainConfig, n_users: int, n_items: int, vocab: Vocabulary
) -> ModelDims:
    return ModelDims(
        n_users=n_users,
        n_items=n_items,
        n_factors=config.n_factors,
        n_preferred=config.n_preferred,
        n_rejected=config.n_rejected,
        n_filters=config.n_filters,
        filter_width=config.filter_width,
        embedding_dim=config.embedding_dim,
        attention_hidden=config.attention_hidden,
        vocab_size=len(vocab),
    )


def init_params(
    config: TrainConfig,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    n_users: int,
    n_items: int,
    seed: int,
) -> ModelParams:
    """
    Xavier-uniform weights, zero biases and a copy of the corpus embeddings.

    Arrays are drawn in a fixed name order from one generator, so a seed
    fixes every value.
    """
    if n_users < 1 or n_items < 1:
        raise ConfigError(f"need at least one user and item, got {n_users}/{n_items}")
    if len(embeddings) != len(vocab):
        raise ConfigError(
            f"embedding table has {len(embeddings)} rows for {len(vocab)} tokens"
        )
    if embeddings.dim != config.embedding_dim:
        raise ConfigError(
            f"embedding_dim {config.embedding_dim} does not match "
            f"table width {embeddings.dim}"
        )
    if embeddings.pad_index != vocab.pad_index:
        raise ConfigError("embedding table and vocabulary disagree on PAD")

    dims = model_dims(config, n_users, n_items, vocab)
    rng = np.random.default_rng(seed)
    arrays: Dict[str, np.ndarray] = {}
    for name, shape in dims.shapes().items():
        if name == "embeddings":
            arrays[name] = embeddings.matrix.astype(np.float64, copy=True)
        elif name in _BIASES:
            arrays[name] = np.zeros(shape)
        else:
            bound = xavier_bound(shape)
            arrays[name] = rng.uniform(-bound, bound, size=shape)

    logger.debug(
        f"Initialised {sum(a.size for a in arrays.values())} parameters "
        f"(seed={seed})"
    )
    return ModelParams(
        dims=dims,
        arrays=arrays,
        vocab_digest=vocab.digest(),
        trainable_embeddings=not config.freeze_embeddings,
        extra={"variant": config.variant.value},
    )
