import numpy as np
import pytest

from src.corpus.synthetic import generate_synthetic
from src.lib.core.errors import ConfigError
from src.schemas.config import SyntheticConfig

SMALL = SyntheticConfig(n_users=12, n_items=10, n_aspects=2, reviews_per_user=6, seed=3)


def test_sizes_and_ranges():
    records, truth = generate_synthetic(SMALL)
    assert len(records) == 12 * 6
    assert all(1.0 <= r.rating <= 5.0 for r in records)
    assert truth.rho_p.shape == (12, 2)
    assert np.allclose(truth.rho_p.sum(axis=1), 1.0)
    assert len({(r.user_id, r.item_id) for r in records}) == len(records)


def test_generation_is_seeded():
    a, _ = generate_synthetic(SMALL)
    b, _ = generate_synthetic(SMALL)
    assert a == b
    c, _ = generate_synthetic(SMALL.model_copy(update={"seed": 4}))
    assert a != c


def test_noise_free_ratings_follow_the_planted_model():
    records, truth = generate_synthetic(SMALL)
    users = {uid: k for k, uid in enumerate(truth.user_ids)}
    items = {iid: k for k, iid in enumerate(truth.item_ids)}
    for rec in records:
        planted = truth.planted_rating(users[rec.user_id], items[rec.item_id])
        assert rec.rating == pytest.approx(planted)


def test_reviews_draw_from_the_matching_polarity_pool():
    records, _ = generate_synthetic(SMALL)
    for rec in records:
        words = rec.review.split()
        wrong = "bad" if rec.rating >= 3.0 else "good"
        assert not any(w.startswith(wrong) for w in words)
        assert len(words) == SMALL.words_per_review


def test_uniform_importance():
    config = SMALL.model_copy(update={"uniform_importance": True})
    _, truth = generate_synthetic(config)
    assert np.allclose(truth.rho_p, 0.5)
    assert np.allclose(truth.rho_r, 0.5)


@pytest.mark.parametrize(
    "update",
    [
        {"n_users": 0},
        {"n_aspects": 0},
        {"imbalance_ratio": 0.0},
        {"imbalance_ratio": 1.0},
    ],
)
def test_invalid_settings(update):
    with pytest.raises(ConfigError):
        generate_synthetic(SMALL.model_copy(update=update))


def test_high_imbalance_gives_mostly_positive_reviews():
    config = SyntheticConfig(n_users=200, n_items=200, imbalance_ratio=0.95, seed=0)
    records, _ = generate_synthetic(config)
    positive, total = {}, {}
    for rec in records:
        total[rec.user_id] = total.get(rec.user_id, 0) + 1
        positive[rec.user_id] = positive.get(rec.user_id, 0) + (rec.rating >= 3.0)
    shares = [positive[u] / total[u] for u in total]
    assert min(shares) >= 0.94
    assert sum(positive.values()) / len(records) >= 0.94
