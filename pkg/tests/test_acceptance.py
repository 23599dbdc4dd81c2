"""End-to-end training runs on planted synthetic corpora (``pytest -m slow``)"""

import itertools
import statistics
import time

import numpy as np
import pytest

from src.corpus import prepare_corpus
from src.corpus.synthetic import generate_synthetic
from src.evaluation.explain import classify_words, top_aspect_words
from src.evaluation.metrics import evaluate
from src.model.rpr import RPRModel
from src.schemas.config import GridSpec, SyntheticConfig, TrainConfig, Variant
from src.training.baseline import train_baseline
from src.training.certify import certify_gradients
from src.training.search import grid_search
from src.training.trainer import train
from src.training.variants import VARIANT_WIRINGS, variant_documents

pytestmark = pytest.mark.slow

CONFIG = TrainConfig(
    n_factors=8,
    n_preferred=2,
    n_rejected=2,
    n_filters=8,
    embedding_dim=16,
    attention_hidden=8,
    learning_rate=0.01,
    batch_size=32,
    max_epochs=30,
    patience=5,
    seed=0,
)


@pytest.fixture(scope="module")
def planted():
    config = SyntheticConfig(
        n_users=60, n_items=30, n_aspects=2, reviews_per_user=12, seed=0
    )
    records, truth = generate_synthetic(config)
    return prepare_corpus(records, seed=0, embedding_dim=16), truth


def mean_predictor_mse(corpus):
    mean = np.mean([r.rating for r in corpus.split.train])
    return float(np.mean([(r.rating - mean) ** 2 for r in corpus.split.test]))


def test_full_model_beats_the_global_mean(planted):
    corpus, _ = planted
    params, history = train(corpus, CONFIG)
    model = RPRModel(
        params,
        variant_documents(corpus, VARIANT_WIRINGS[Variant.BASE]),
        corpus.user_index,
        corpus.item_index,
    )
    report = evaluate(model, corpus.split.test)
    assert report.mse < mean_predictor_mse(corpus)
    assert history.best_val_mse <= history.epochs[0].val_mse


def test_baseline_beats_the_global_mean(planted):
    corpus, _ = planted
    model, _ = train_baseline(corpus, CONFIG)
    assert evaluate(model, corpus.split.test).mse < mean_predictor_mse(corpus)


def test_training_is_reproducible_end_to_end(planted):
    corpus, _ = planted
    config = CONFIG.with_overrides(max_epochs=3)
    a, _ = train(corpus, config)
    b, _ = train(corpus, config)
    assert all(np.array_equal(a[name], b[name]) for name in a)


@pytest.mark.parametrize("seed", range(5))
def test_gradients_certify_across_seeds(seed):
    for wiring in VARIANT_WIRINGS.values():
        assert certify_gradients(seed, wiring).passed


def held_out_mse(corpus, config):
    params, _ = train(corpus, config)
    model = RPRModel(
        params,
        variant_documents(corpus, VARIANT_WIRINGS[config.variant]),
        corpus.user_index,
        corpus.item_index,
        VARIANT_WIRINGS[config.variant],
    )
    return evaluate(model, corpus.split.test).mse


def synthetic_corpus(**overrides):
    records, truth = generate_synthetic(SyntheticConfig(**overrides))
    return prepare_corpus(records, seed=0, embedding_dim=16), truth


@pytest.fixture(scope="module")
def noiseless():
    corpus, truth = synthetic_corpus(n_users=500, n_items=200, imbalance_ratio=0.5)
    config = CONFIG.with_overrides(
        batch_size=100, max_epochs=200, patience=10, use_dropout=False
    )
    started = time.perf_counter()
    params, history = train(corpus, config)
    return corpus, truth, params, history, time.perf_counter() - started


def test_noiseless_planted_corpus_is_fit(noiseless):
    corpus, _, params, history, seconds = noiseless
    model = RPRModel(
        params,
        variant_documents(corpus, VARIANT_WIRINGS[Variant.BASE]),
        corpus.user_index,
        corpus.item_index,
    )
    assert evaluate(model, corpus.split.train).mse < 0.05
    assert len(history.epochs) <= 200
    assert seconds < 300


def best_permutation_share(counts):
    """Share of pool words landing in the aspect matched to their pool"""
    n_pools, n_aspects = counts.shape
    best = max(
        sum(counts[x, perm[x]] for x in range(n_pools))
        for perm in itertools.permutations(range(n_aspects), n_pools)
    )
    return best / counts.sum()


@pytest.mark.parametrize("positive", [True, False])
def test_planted_pools_form_word_clusters(noiseless, positive):
    corpus, truth, params, _, _ = noiseless
    pools = truth.preferred_pools if positive else truth.rejected_pools
    pool_of = {word: x for x, words in enumerate(pools) for word in words}
    documents = variant_documents(corpus, VARIANT_WIRINGS[Variant.BASE])
    n_aspects = params["head_p.W" if positive else "head_r.W"].shape[0]

    counts = np.zeros((len(pools), n_aspects))
    for row in documents:
        tokens = row[0 if positive else 1]
        classes = classify_words(params, tokens, positive, corpus.vocab)
        for word, aspect in classes.items():
            if word in pool_of:
                counts[pool_of[word], aspect] += 1
    assert best_permutation_share(counts) >= 0.7


def test_top_words_per_aspect_are_disjoint(noiseless):
    corpus, _, params, _, _ = noiseless
    documents = variant_documents(corpus, VARIANT_WIRINGS[Variant.BASE])
    for pos, _ in documents[:50]:
        ranked = top_aspect_words(params, pos, True, corpus.vocab, k=5)
        lists = [{word for word, _ in words} for words in ranked]
        for a, b in itertools.combinations(lists, 2):
            assert not a & b
        present = {corpus.vocab.index_to_token[int(t)] for t in pos}
        assert set().union(*lists) <= present


def test_offsets_help_under_heavy_imbalance():
    base, no_offset = [], []
    for seed in range(5):
        corpus, _ = synthetic_corpus(
            n_users=200, n_items=100, imbalance_ratio=0.95, seed=seed
        )
        config = CONFIG.with_overrides(seed=seed, max_epochs=20)
        base.append(held_out_mse(corpus, config))
        ablated = config.with_overrides(variant="no_offset")
        no_offset.append(held_out_mse(corpus, ablated))
    assert statistics.median(base) <= 0.95 * statistics.median(no_offset)


def test_full_model_beats_every_ablation():
    scores = {variant: [] for variant in Variant}
    for seed in range(3):
        corpus, _ = synthetic_corpus(n_users=200, n_items=100, seed=seed)
        for variant in Variant:
            config = CONFIG.with_overrides(seed=seed, max_epochs=20, variant=variant)
            scores[variant].append(held_out_mse(corpus, config))
    base = statistics.median(scores.pop(Variant.BASE))
    for variant, mses in scores.items():
        assert base < statistics.median(mses), variant


def test_aspect_sweep_prefers_a_moderate_count():
    best = []
    for seed in range(3):
        corpus, _ = synthetic_corpus(n_users=200, n_items=100, n_aspects=3, seed=seed)
        grid = GridSpec(
            n_factors=[32],
            n_aspects=[1, 2, 3, 4, 5],
            learning_rate=[0.01],
            batch_size=[32],
        )
        chosen, _ = grid_search(corpus, grid, CONFIG.with_overrides(seed=seed))
        best.append(chosen.n_preferred)
    assert statistics.median(best) in {2, 3, 4}
