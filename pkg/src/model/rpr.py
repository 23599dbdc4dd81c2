"""
Polarity-wise rating model.

A rating is the preferred-aspect inner product minus the rejected-aspect
inner product:

    r_hat = (rho_p + mu_p) . s_p - (rho_r + mu_r) . s_r

where the aspect scores come from the latent factors through the indicator
matrices, the raw importance vectors are extracted from a user's positive
and negative documents, and the offsets transfer importance across
polarities through an attention map over indicator columns.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..corpus.documents import PolarityDocuments, lookup_documents
from ..kernel import ops
from ..kernel.tape import ArrayLike, Tape, Tensor, as_tensor
from ..lib.core.errors import DivergenceError, UnknownEntityError
from ..schemas.config import RegConfig
from .params import (
    THETA,
    AspectIndicators,
    AttentionNet,
    ConvLayer,
    ImportanceHead,
    ModelParams,
    ModelView,
)
from .wiring import BASE_WIRING, VariantWiring

logger = logging.getLogger(__name__)

# (positive tokens, negative tokens) per user row
DocumentTable = Sequence[Tuple[np.ndarray, np.ndarray]]

# users per batched importance pass at inference time
WARM_CHUNK = 256


class AttentionDirection(str, Enum):
    REJECTED_ATTENDS_PREFERRED = "rejected-attends-preferred"
    PREFERRED_ATTENDS_REJECTED = "preferred-attends-rejected"


@dataclass(frozen=True)
class RatingBatch:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray

    def __len__(self) -> int:
        return len(self.ratings)


@dataclass(frozen=True)
class AspectProfile:
    """Every intermediate of one (user, item) prediction"""

    s_p: np.ndarray
    s_r: np.ndarray
    rho_p: np.ndarray
    rho_r: np.ndarray
    mu_p: np.ndarray
    mu_r: np.ndarray
    rho_p_plus: np.ndarray
    rho_r_plus: np.ndarray
    r_hat: float


def document_table(
    documents: Mapping[str, PolarityDocuments], user_index: Mapping[str, int]
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Token arrays per user row, in user-index order"""
    rows = sorted(user_index.items(), key=lambda kv: kv[1])
    table = []
    for user_id, _ in rows:
        docs = lookup_documents(documents, user_id)
        table.append((docs.positive_tokens, docs.negative_tokens))
    return table


def aspect_scores(
    p_u: ArrayLike, q_i: ArrayLike, indicators: AspectIndicators
) -> Tuple[Tensor, Tensor]:
    """s_p = M^T (p_u * q_i), s_r = V^T (p_u * q_i); rows may be batched"""
    interaction = ops.elementwise_product(p_u, q_i)
    return ops.matmul(interaction, indicators.M), ops.matmul(
        interaction, indicators.V
    )


def extract_importance(
    doc_token_ids: np.ndarray,
    embeddings: ArrayLike,
    conv: ConvLayer,
    head: ImportanceHead,
    pooling: str = "sum",
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    pad_index: Optional[int] = None,
) -> Tensor:
    """
    Aspect importance of one document.

    Tokens are embedded and passed through the convolution; each word is
    projected by the head and the per-word weights are summed (or the
    convolution features max-pooled before the head) and normalised by a
    softmax. An empty document gives the uniform distribution.
    """
    n_aspects = as_tensor(head.W).shape[0]
    ids = np.asarray(doc_token_ids, dtype=np.int64)
    if ids.size == 0:
        return ops.softmax(np.zeros(n_aspects))

    embedded = ops.gather_rows(embeddings, ids)
    pad_positions = None if pad_index is None else ids == pad_index
    features = ops.conv_context(embedded, conv.K, conv.b, pad_positions)
    features = ops.dropout(features, dropout_rate, rng)

    if pooling == "max":
        pooled = ops.reduce_max(features)
        logits = ops.linear_relu(pooled, head.W, head.b)
    else:
        word_weights = ops.linear_relu(features, head.W, head.b)
        word_weights = ops.dropout(word_weights, dropout_rate, rng)
        logits = ops.reduce_sum(word_weights, axis=0)
    return ops.softmax(logits)


def extract_importance_batch(
    docs: Sequence[np.ndarray],
    embeddings: ArrayLike,
    conv: ConvLayer,
    head: ImportanceHead,
    pooling: str = "sum",
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    pad_index: Optional[int] = None,
) -> Tensor:
    """
    Importance of several documents at once, one row per document.

    Documents are right-filled to a common length. Filler positions embed to
    zero, count as padding for the convolution and are masked out of the
    pooling, so every row equals ``extract_importance`` of its document.
    """
    n_aspects = as_tensor(head.W).shape[0]
    lengths = np.array([len(d) for d in docs], dtype=np.int64)
    n, width = len(docs), int(lengths.max(initial=0))
    if width == 0:
        return ops.softmax(np.zeros((n, n_aspects)), axis=-1)

    ids = np.full((n, width), 0 if pad_index is None else pad_index, dtype=np.int64)
    for row, doc in enumerate(docs):
        ids[row, : len(doc)] = doc
    valid = np.arange(width)[None, :] < lengths[:, None]
    pad_positions = ~valid if pad_index is None else ~valid | (ids == pad_index)

    embedded = ops.gather_rows(embeddings, ids)
    dim = embedded.shape[-1]
    embedded = ops.elementwise_product(
        embedded, np.broadcast_to(valid[..., None], (n, width, dim)).astype(float)
    )
    features = ops.conv_context(embedded, conv.K, conv.b, pad_positions)
    features = ops.dropout(features, dropout_rate, rng)

    if pooling == "max":
        # filler rows next to a document end still see its last tokens
        features = ops.elementwise_product(
            features,
            np.broadcast_to(valid[..., None], features.shape).astype(float),
        )
        logits = ops.linear_relu(ops.reduce_max(features), head.W, head.b)
    else:
        word_weights = ops.linear_relu(features, head.W, head.b)
        word_weights = ops.dropout(word_weights, dropout_rate, rng)
        word_weights = ops.elementwise_product(
            word_weights,
            np.broadcast_to(valid[..., None], (n, width, n_aspects)).astype(float),
        )
        logits = ops.reduce_sum(word_weights, axis=1)
    # empty documents get uniform importance
    nonempty = np.broadcast_to((lengths > 0)[:, None], (n, n_aspects)).astype(float)
    return ops.softmax(ops.elementwise_product(logits, nonempty), axis=-1)


def attention_logits(indicators: AspectIndicators, att: AttentionNet) -> Tensor:
    """phi'[x, y] = h^T ReLU(W (v_y * m_x) + b), shape (|P|, |R|)"""
    pairs = ops.pairwise_product(indicators.M, indicators.V)
    hidden = ops.linear_relu(pairs, att.W, att.b)
    return ops.matmul(hidden, att.h)


def attention_map(
    indicators: AspectIndicators, att: AttentionNet, direction: AttentionDirection
) -> Tensor:
    """
    Attention between aspect polarities.

    rejected-attends-preferred gives Phi (|P| x |R|), each column a softmax
    over preferred aspects; preferred-attends-rejected gives Psi (|R| x |P|),
    each column a softmax over rejected aspects. Both share one network.
    """
    logits = attention_logits(indicators, att)
    if AttentionDirection(direction) is AttentionDirection.REJECTED_ATTENDS_PREFERRED:
        return ops.softmax(logits, axis=0)
    return ops.transpose(ops.softmax(logits, axis=1))


def attention_maps(
    indicators: AspectIndicators, att: AttentionNet
) -> Tuple[Tensor, Tensor]:
    """(Phi, Psi) from one shared set of logits"""
    logits = attention_logits(indicators, att)
    return ops.softmax(logits, axis=0), ops.transpose(ops.softmax(logits, axis=1))


def enhance_importance(
    rho_p: ArrayLike, rho_r: ArrayLike, phi: ArrayLike, psi: ArrayLike
) -> Tuple[Tensor, Tensor, Tensor, Tensor]:
    """
    Add cross-polarity offsets: mu_r = Phi^T rho_p, mu_p = Psi^T rho_r.

    Returns:
        (rho_p_plus, rho_r_plus, mu_p, mu_r)
    """
    mu_r = ops.matmul(rho_p, phi)
    mu_p = ops.matmul(rho_r, psi)
    return ops.add(rho_p, mu_p), ops.add(rho_r, mu_r), mu_p, mu_r


def predict_rating(
    rho_p_plus: ArrayLike, s_p: ArrayLike, rho_r_plus: ArrayLike, s_r: ArrayLike
) -> Tensor:
    """r_hat = rho_p_plus . s_p - rho_r_plus . s_r over the last axis"""
    positive = ops.reduce_sum(ops.elementwise_product(rho_p_plus, s_p), axis=-1)
    negative = ops.reduce_sum(ops.elementwise_product(rho_r_plus, s_r), axis=-1)
    return ops.sub(positive, negative)


def _uniform(shape: Tuple[int, ...]) -> Tensor:
    return as_tensor(np.full(shape, 1.0 / shape[-1]))


def forward_batch(
    view: ModelView,
    batch: RatingBatch,
    documents: DocumentTable,
    wiring: VariantWiring = BASE_WIRING,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    pad_index: Optional[int] = None,
) -> Tensor:
    """Predicted ratings of a batch; importance is extracted once per user"""
    indicators = view.indicators
    n_p = as_tensor(indicators.M).shape[1]
    n_r = as_tensor(indicators.V).shape[1]
    B = len(batch)

    p = ops.gather_rows(view.latent.P, batch.users)
    q = ops.gather_rows(view.latent.Q, batch.items)
    s_p, s_r = aspect_scores(p, q, indicators)

    if wiring.uniform_importance:
        return predict_rating(_uniform((B, n_p)), s_p, _uniform((B, n_r)), s_r)

    unique_users, inverse = np.unique(batch.users, return_inverse=True)
    rows = [documents[int(u)] for u in unique_users]
    rho_p, rho_r = (
        ops.gather_rows(
            extract_importance_batch(
                [row[side] for row in rows],
                view.embeddings,
                view.conv,
                view.head(side == 0),
                pooling=wiring.pooling,
                dropout_rate=dropout_rate,
                rng=rng,
                pad_index=pad_index,
            ),
            inverse,
        )
        for side in (0, 1)
    )

    if wiring.use_offset:
        phi, psi = attention_maps(indicators, view.attention)
        rho_p, rho_r, _, _ = enhance_importance(rho_p, rho_r, phi, psi)
    return predict_rating(rho_p, s_p, rho_r, s_r)


def objective(
    view: ModelView,
    batch: RatingBatch,
    documents: DocumentTable,
    reg: RegConfig,
    wiring: VariantWiring = BASE_WIRING,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    pad_index: Optional[int] = None,
) -> Tensor:
    """
    1/2 sum (r - r_hat)^2 + beta1 (|M|_1 + |V|_1)
        + beta2/2 (|p_u|^2 + |q_i|^2 + sum_theta |theta|^2)

    The latent L2 term covers the user and item rows touched by the batch;
    theta is the convolution, both heads and the attention network.
    """
    r_hat = forward_batch(view, batch, documents, wiring, dropout_rate, rng, pad_index)
    residual = ops.sub(np.asarray(batch.ratings, dtype=np.float64), r_hat)
    total = ops.scale(ops.square_sum(residual), 0.5)

    if reg.beta1 > 0:
        l1 = ops.add(ops.abs_sum(view.indicators.M), ops.abs_sum(view.indicators.V))
        total = ops.add(total, ops.scale(l1, reg.beta1))

    if reg.beta2 > 0:
        l2 = ops.add(
            ops.square_sum(ops.gather_rows(view.latent.P, np.unique(batch.users))),
            ops.square_sum(ops.gather_rows(view.latent.Q, np.unique(batch.items))),
        )
        for name in THETA:
            l2 = ops.add(l2, ops.square_sum(view.mapping[name]))
        total = ops.add(total, ops.scale(l2, reg.beta2 / 2.0))
    return total


def loss(
    batch: RatingBatch,
    params: ModelParams,
    reg: RegConfig,
    documents: DocumentTable,
    wiring: VariantWiring = BASE_WIRING,
) -> float:
    """Objective value without recording gradients"""
    value = objective(
        params.view(), batch, documents, reg, wiring, pad_index=params.pad_index
    )
    return value.item()


def forward_backward(
    batch: RatingBatch,
    params: ModelParams,
    reg: RegConfig,
    documents: DocumentTable,
    wiring: VariantWiring = BASE_WIRING,
    dropout_rate: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    batch_index: int = 0,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Objective value and its gradient for every parameter.

    The PAD embedding row always receives a zero gradient.
    """
    tape = Tape()
    view = params.watch(tape)
    total = objective(
        view, batch, documents, reg, wiring, dropout_rate, rng, params.pad_index
    )
    value = total.item()
    if not math.isfinite(value):
        logger.error(f"Non-finite objective at batch {batch_index}")
        raise DivergenceError(batch_index)

    grads = tape.gradients(total)
    grads["embeddings"][params.pad_index] = 0.0
    return value, grads


class RPRModel:
    """
    Inference over a frozen parameter snapshot.

    Importance vectors depend only on the user, so they are computed once per
    user and cached; every prediction goes through ``profile``.
    """

    def __init__(
        self,
        params: ModelParams,
        documents: DocumentTable,
        user_index: Mapping[str, int],
        item_index: Mapping[str, int],
        wiring: VariantWiring = BASE_WIRING,
    ):
        self.params = params
        self.documents = documents
        self.user_index = dict(user_index)
        self.item_index = dict(item_index)
        self.wiring = wiring
        self._view = params.view()
        self._importance: Dict[int, Tuple[np.ndarray, ...]] = {}
        self._maps: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def user_row(self, user_id: str) -> int:
        try:
            return self.user_index[user_id]
        except KeyError:
            raise UnknownEntityError("user", user_id) from None

    def item_row(self, item_id: str) -> int:
        try:
            return self.item_index[item_id]
        except KeyError:
            raise UnknownEntityError("item", item_id) from None

    def attention(self) -> Tuple[np.ndarray, np.ndarray]:
        """(Phi, Psi) of the frozen parameters"""
        if self._maps is None:
            phi, psi = attention_maps(self._view.indicators, self._view.attention)
            self._maps = (phi.value, psi.value)
        return self._maps

    def warm(self, user_ids: Iterable[str]) -> None:
        """Cache the importance of many users in batched passes"""
        rows = {self.user_index[u] for u in user_ids if u in self.user_index}
        self.warm_rows(rows)

    def warm_rows(self, users: Iterable[int]) -> None:
        missing = sorted({int(u) for u in users} - self._importance.keys())
        for start in range(0, len(missing), WARM_CHUNK):
            self._fill(missing[start : start + WARM_CHUNK])

    def _fill(self, users: Sequence[int]) -> None:
        dims = self.params.dims
        n = len(users)
        if self.wiring.uniform_importance:
            rho_p = np.full((n, dims.n_preferred), 1.0 / dims.n_preferred)
            rho_r = np.full((n, dims.n_rejected), 1.0 / dims.n_rejected)
        else:
            rho_p, rho_r = (
                extract_importance_batch(
                    [self.documents[u][side] for u in users],
                    self._view.embeddings,
                    self._view.conv,
                    self._view.head(side == 0),
                    pooling=self.wiring.pooling,
                    pad_index=self.params.pad_index,
                ).value
                for side in (0, 1)
            )

        if self.wiring.use_offset and not self.wiring.uniform_importance:
            phi, psi = self.attention()
            plus_p, plus_r, mu_p, mu_r = (
                t.value for t in enhance_importance(rho_p, rho_r, phi, psi)
            )
        else:
            plus_p, plus_r = rho_p, rho_r
            mu_p, mu_r = np.zeros_like(rho_p), np.zeros_like(rho_r)

        for k, user in enumerate(users):
            self._importance[user] = (
                rho_p[k],
                rho_r[k],
                mu_p[k],
                mu_r[k],
                plus_p[k],
                plus_r[k],
            )

    def importance(self, user: int) -> Tuple[np.ndarray, ...]:
        """(rho_p, rho_r, mu_p, mu_r, rho_p_plus, rho_r_plus) of a user row"""
        if user not in self._importance:
            self._fill([user])
        return self._importance[user]

    def profile_rows(self, user: int, item: int) -> AspectProfile:
        P, Q = self._view.latent
        scores = aspect_scores(P[user], Q[item], self._view.indicators)
        s_p, s_r = (t.value for t in scores)
        rho_p, rho_r, mu_p, mu_r, plus_p, plus_r = self.importance(user)
        r_hat = predict_rating(plus_p, s_p, plus_r, s_r).item()
        return AspectProfile(
            s_p=s_p,
            s_r=s_r,
            rho_p=rho_p,
            rho_r=rho_r,
            mu_p=mu_p,
            mu_r=mu_r,
            rho_p_plus=plus_p,
            rho_r_plus=plus_r,
            r_hat=r_hat,
        )

    def profile(self, user_id: str, item_id: str) -> AspectProfile:
        return self.profile_rows(self.user_row(user_id), self.item_row(item_id))

    def rating(self, user_id: str, item_id: str) -> float:
        return self.profile(user_id, item_id).r_hat

    def predict_rows(self, users: Sequence[int], items: Sequence[int]) -> np.ndarray:
        self.warm_rows(users)
        return np.array(
            [self.profile_rows(int(u), int(i)).r_hat for u, i in zip(users, items)],
            dtype=np.float64,
        )

    def predict(self, user_ids: Sequence[str], item_ids: Sequence[str]) -> np.ndarray:
        self.warm(user_ids)
        return np.array(
            [self.profile(u, i).r_hat for u, i in zip(user_ids, item_ids)],
            dtype=np.float64,
        )
