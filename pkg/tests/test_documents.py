import numpy as np

from src.corpus.documents import build_polarity_documents, lookup_documents
from src.corpus.text import Vocabulary, tokenize
from src.schemas.records import InteractionRecord


def _rec(user, rating, review):
    return InteractionRecord(user_id=user, item_id="i", rating=rating, review=review)


VOCAB = Vocabulary(["a", "b", "c", "d", "e"])


def test_threshold_splits_polarity():
    records = [_rec("u", 3.0, "a b"), _rec("u", 2.9, "c"), _rec("u", 5.0, "d")]
    docs = build_polarity_documents(records, VOCAB)["u"]
    assert VOCAB.decode(docs.positive_tokens) == ["a", "b", "d"]
    assert VOCAB.decode(docs.negative_tokens) == ["c"]


def test_truncation_keeps_most_recent_tokens():
    records = [_rec("u", 5.0, "a b c"), _rec("u", 4.0, "d e")]
    docs = build_polarity_documents(records, VOCAB, max_len=3)["u"]
    assert VOCAB.decode(docs.positive_tokens) == ["c", "d", "e"]
    assert len(docs.negative_tokens) == 0


def test_merge_feeds_both_sequences():
    records = [_rec("u", 5.0, "a"), _rec("u", 1.0, "b")]
    docs = build_polarity_documents(records, VOCAB, merge=True)["u"]
    assert VOCAB.decode(docs.positive_tokens) == ["a", "b"]
    assert np.array_equal(docs.positive_tokens, docs.negative_tokens)


def test_unknown_words_become_oov():
    docs = build_polarity_documents([_rec("u", 4.0, "a zzz")], VOCAB)["u"]
    assert list(docs.positive_tokens) == [0, VOCAB.oov_index]


def test_lookup_of_unknown_user_is_empty():
    docs = lookup_documents({}, "ghost")
    assert docs.user_id == "ghost"
    assert len(docs.tokens(True)) == 0
    assert len(docs.tokens(False)) == 0


def test_documents_hold_only_training_text(toy_corpus):
    train_words = {w for r in toy_corpus.split.train for w in tokenize(r.review)}
    assert set(toy_corpus.vocab.index_to_token[: toy_corpus.vocab.n_regular]) == (
        train_words
    )
    for docs in toy_corpus.documents.values():
        for tokens in (docs.positive_tokens, docs.negative_tokens):
            assert all(t < toy_corpus.vocab.n_regular for t in tokens)


def test_every_training_user_has_documents(toy_corpus):
    assert set(toy_corpus.documents) == set(toy_corpus.user_index)
