"""Gradient certification on a small random instance"""

from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np

from ..kernel.gradcheck import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    DEFAULT_STEP,
    compare_gradients,
    finite_diff_grad,
)
from ..model.params import ModelDims, ModelParams
from ..model.rpr import RatingBatch, forward_backward, loss
from ..model.wiring import BASE_WIRING, VariantWiring
from ..schemas.config import RegConfig
from ..schemas.reports import GradCheckReport
from .initialize import xavier_bound

logger = logging.getLogger(__name__)

TOY_DIMS = ModelDims(
    n_users=2,
    n_items=2,
    n_factors=3,
    n_preferred=2,
    n_rejected=2,
    n_filters=3,
    filter_width=3,
    embedding_dim=4,
    attention_hidden=3,
    vocab_size=8,
)
TOY_DOC_LEN = 5
TOY_REG = RegConfig(beta1=1e-2, beta2=1e-2)


def toy_instance(
    seed: int, dims: ModelDims = TOY_DIMS
) -> Tuple[ModelParams, RatingBatch, List[Tuple[np.ndarray, np.ndarray]]]:
    """
    Random parameters, every (user, item) pair rated, and one positive and
    one negative 5-word document per user drawn from the regular tokens.
    """
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in dims.shapes().items():
        # biases are random too so every coordinate is exercised
        bound = xavier_bound(shape) if len(shape) > 1 else 0.5
        arrays[name] = rng.uniform(-bound, bound, size=shape)
    pad = dims.vocab_size - 1
    arrays["embeddings"][pad] = 0.0
    params = ModelParams(dims=dims, arrays=arrays)

    n_regular = dims.vocab_size - 2
    documents = [
        (
            rng.integers(0, n_regular, size=TOY_DOC_LEN),
            rng.integers(0, n_regular, size=TOY_DOC_LEN),
        )
        for _ in range(dims.n_users)
    ]
    users, items = np.meshgrid(np.arange(dims.n_users), np.arange(dims.n_items))
    batch = RatingBatch(
        users=users.ravel(),
        items=items.ravel(),
        ratings=rng.integers(1, 6, size=users.size).astype(np.float64),
    )
    return params, batch, documents


def certify_gradients(
    seed: int = 0,
    wiring: VariantWiring = BASE_WIRING,
    reg: RegConfig = TOY_REG,
    h: float = DEFAULT_STEP,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GradCheckReport:
    """Compare analytic and central-difference gradients of the objective"""
    params, batch, documents = toy_instance(seed)
    _, analytic = forward_backward(batch, params, reg, documents, wiring)
    numeric = finite_diff_grad(
        lambda _: loss(batch, params, reg, documents, wiring), params.arrays, h
    )
    report = compare_gradients(analytic, numeric, rtol, atol)
    logger.info(
        f"gradcheck seed={seed}: max_rel={report.max_checked_relative_error:.3e} "
        f"({report.worst_parameter}{report.worst_index}) passed={report.passed}"
    )
    return report
