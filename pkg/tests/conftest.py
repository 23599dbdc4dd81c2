"""Shared fixtures: a hand-written review corpus, a toy model and configs"""

from typing import List

import numpy as np
import pytest

from src.corpus import PreparedCorpus, prepare_corpus
from src.corpus.text import Vocabulary
from src.model.rpr import RPRModel
from src.schemas.config import TrainConfig
from src.schemas.records import InteractionRecord
from src.training.certify import toy_instance

USERS = ["ann", "bob", "cat", "dan"]
ITEMS = ["i1", "i2", "i3", "i4"]
GOOD = ["great", "lovely", "crisp", "warm"]
BAD = ["boring", "noisy", "awful", "flat"]


def make_records() -> List[InteractionRecord]:
    """Every user rates every item; ratings cycle through 1..5"""
    records = []
    for u, user in enumerate(USERS):
        for i, item in enumerate(ITEMS):
            rating = float(1 + (u + 2 * i) % 5)
            words = GOOD if rating >= 3 else BAD
            review = f"the {words[i]} {words[u]} album, {words[(u + i) % 4]} mix"
            records.append(
                InteractionRecord(
                    user_id=user, item_id=item, rating=rating, review=review
                )
            )
    return records


@pytest.fixture
def records() -> List[InteractionRecord]:
    return make_records()


@pytest.fixture
def toy_corpus() -> PreparedCorpus:
    return prepare_corpus(make_records(), seed=0, embedding_dim=8)


@pytest.fixture
def small_config() -> TrainConfig:
    return TrainConfig(
        n_factors=4,
        n_preferred=2,
        n_rejected=2,
        n_filters=4,
        filter_width=3,
        embedding_dim=8,
        attention_hidden=4,
        learning_rate=0.01,
        batch_size=4,
        max_epochs=3,
        patience=3,
        use_dropout=False,
        seed=0,
    )


@pytest.fixture
def toy_vocab() -> Vocabulary:
    # six regular tokens plus OOV and PAD match the toy instance's vocab_size
    return Vocabulary([f"w{k}" for k in range(6)])


@pytest.fixture
def toy_model() -> RPRModel:
    params, _, documents = toy_instance(0)
    return RPRModel(params, documents, {"u0": 0, "u1": 1}, {"i0": 0, "i1": 1})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
