"""
Synthetic review corpora with planted aspect structure.

Each user gets a preferred and a rejected importance vector on the simplex,
each item a preferred-quality and a rejected-flaw vector in [0, 1]. The
rating of a pair is ``3 + 2 * (rho_p . a_i - rho_r . b_i)`` plus Gaussian
noise, clipped to [1, 5]. Positive reviews draw words from the preferred
aspect pools, negative reviews from the rejected pools, so aspect words
co-occur with their aspect's polarity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..lib.core.errors import ConfigError
from ..schemas.config import SyntheticConfig
from ..schemas.records import MAX_RATING, MIN_RATING, InteractionRecord

logger = logging.getLogger(__name__)

ASPECT_WORD_RATE = 0.75


@dataclass(frozen=True)
class SyntheticGroundTruth:
    """Planted vectors a trained model can be checked against"""

    rho_p: np.ndarray
    rho_r: np.ndarray
    quality_p: np.ndarray
    quality_r: np.ndarray
    preferred_pools: List[List[str]]
    rejected_pools: List[List[str]]
    user_ids: List[str]
    item_ids: List[str]

    def planted_rating(self, user: int, item: int) -> float:
        score = self.rho_p[user] @ self.quality_p[item] - (
            self.rho_r[user] @ self.quality_r[item]
        )
        return float(3.0 + 2.0 * score)


def _validate(config: SyntheticConfig) -> None:
    if config.n_users <= 0 or config.n_items <= 0 or config.n_aspects <= 0:
        raise ConfigError(
            "synthetic corpus needs at least one user, item and aspect, got "
            f"{config.n_users}/{config.n_items}/{config.n_aspects}"
        )
    if not 0.0 < config.imbalance_ratio < 1.0:
        raise ConfigError(
            f"imbalance_ratio must lie in (0, 1), got {config.imbalance_ratio}"
        )


def generate_synthetic(
    config: SyntheticConfig,
) -> Tuple[List[InteractionRecord], SyntheticGroundTruth]:
    """
    Generate a review corpus from a planted polarity-wise model.

    Args:
        config: Generator settings

    Returns:
        Records grouped by user and the planted ground truth
    """
    _validate(config)
    rng = np.random.default_rng(config.seed)
    A = config.n_aspects

    if config.uniform_importance:
        rho_p = np.full((config.n_users, A), 1.0 / A)
        rho_r = np.full((config.n_users, A), 1.0 / A)
    else:
        rho_p = rng.dirichlet(np.ones(A), size=config.n_users)
        rho_r = rng.dirichlet(np.ones(A), size=config.n_users)
    quality_p = rng.uniform(0.0, 1.0, size=(config.n_items, A))
    quality_r = rng.uniform(0.0, 1.0, size=(config.n_items, A))

    preferred_pools = [
        [f"good{x}w{k}" for k in range(config.pool_size)] for x in range(A)
    ]
    rejected_pools = [
        [f"bad{y}w{k}" for k in range(config.pool_size)] for y in range(A)
    ]
    filler = [f"filler{k}" for k in range(config.filler_size)]

    user_ids = [f"u{u:05d}" for u in range(config.n_users)]
    item_ids = [f"i{i:05d}" for i in range(config.n_items)]

    scores = rho_p @ quality_p.T - rho_r @ quality_r.T
    ratings = 3.0 + 2.0 * scores
    if config.noise > 0:
        ratings = ratings + rng.normal(0.0, config.noise, size=ratings.shape)
    ratings = np.clip(ratings, MIN_RATING, MAX_RATING)

    n_reviews = min(config.reviews_per_user, config.n_items)
    n_positive = int(round(config.imbalance_ratio * n_reviews))

    records: List[InteractionRecord] = []
    for u in range(config.n_users):
        chosen = _choose_items(rng, ratings[u], n_reviews, n_positive)
        for i in chosen:
            rating = float(ratings[u, i])
            positive = rating >= 3.0
            if positive:
                weights = rho_p[u] * quality_p[i]
                pools = preferred_pools
            else:
                weights = rho_r[u] * quality_r[i]
                pools = rejected_pools
            words = _review_words(rng, weights, pools, filler, config.words_per_review)
            records.append(
                InteractionRecord(
                    user_id=user_ids[u],
                    item_id=item_ids[i],
                    rating=rating,
                    review=" ".join(words),
                )
            )

    logger.info(
        f"Generated {len(records)} synthetic records over {config.n_users} users, "
        f"{config.n_items} items, {A} aspects (imbalance {config.imbalance_ratio})"
    )
    truth = SyntheticGroundTruth(
        rho_p=rho_p,
        rho_r=rho_r,
        quality_p=quality_p,
        quality_r=quality_r,
        preferred_pools=preferred_pools,
        rejected_pools=rejected_pools,
        user_ids=user_ids,
        item_ids=item_ids,
    )
    return records, truth


def _choose_items(
    rng: np.random.Generator,
    user_ratings: np.ndarray,
    n_reviews: int,
    n_positive: int,
) -> np.ndarray:
    positives = np.flatnonzero(user_ratings >= 3.0)
    negatives = np.flatnonzero(user_ratings < 3.0)

    take_pos = min(n_positive, len(positives))
    take_neg = min(n_reviews - take_pos, len(negatives))
    # Fill from the other polarity when one side runs short
    take_pos = min(n_reviews - take_neg, len(positives))

    chosen = np.concatenate(
        [
            rng.choice(positives, size=take_pos, replace=False),
            rng.choice(negatives, size=take_neg, replace=False),
        ]
    ).astype(np.int64)
    rng.shuffle(chosen)
    return chosen


def _review_words(
    rng: np.random.Generator,
    weights: np.ndarray,
    pools: List[List[str]],
    filler: List[str],
    n_words: int,
) -> List[str]:
    weights = weights + 1e-6
    probs = weights / weights.sum()
    words = []
    for _ in range(n_words):
        if not filler or rng.random() < ASPECT_WORD_RATE:
            aspect = int(rng.choice(len(pools), p=probs))
            pool = pools[aspect]
            words.append(pool[int(rng.integers(len(pool)))])
        else:
            words.append(filler[int(rng.integers(len(filler)))])
    return words
