import numpy as np
import pytest

from src.lib.core.errors import UnknownEntityError
from src.model.rpr import RatingBatch
from src.training.baseline import (
    MFModel,
    baseline_objective,
    init_baseline,
    train_baseline,
)


def test_rating_is_mean_plus_biases_plus_dot():
    arrays = {
        "P": np.array([[1.0, 2.0]]),
        "Q": np.array([[0.5, -1.0]]),
        "b_u": np.array([[0.25]]),
        "b_i": np.array([[-0.5]]),
    }
    model = MFModel(arrays, 3.0, {"u": 0}, {"i": 0})
    assert model.rating("u", "i") == pytest.approx(3.0 + 0.25 - 0.5 - 1.5)
    with pytest.raises(UnknownEntityError):
        model.rating("u", "other")


def test_objective_without_regularization():
    arrays = init_baseline(2, 2, 3, seed=0)
    batch = RatingBatch(np.array([0, 1]), np.array([1, 0]), np.array([4.0, 2.0]))
    value = baseline_objective(arrays, batch, 3.0, 0.0).item()
    model = MFModel(arrays, 3.0, {"a": 0, "b": 1}, {"x": 0, "y": 1})
    preds = np.array([model.rating("a", "y"), model.rating("b", "x")])
    assert value == pytest.approx(0.5 * np.sum((batch.ratings - preds) ** 2))


def test_baseline_trains_on_toy_corpus(toy_corpus, small_config):
    config = small_config.with_overrides(max_epochs=5, patience=5)
    model, history = train_baseline(toy_corpus, config)
    assert history.best_epoch is not None
    assert 1 <= len(history.epochs) <= 5
    rec = toy_corpus.split.test[0]
    assert np.isfinite(model.rating(rec.user_id, rec.item_id))
