from datetime import datetime, timezone

import numpy as np
import pytest

from src.cli.artifacts import (
    DOCUMENTS_FILE,
    decode_documents,
    encode_documents,
    file_digest,
    load_corpus_cache,
    read_manifest,
    read_records,
    write_corpus_cache,
    write_csv,
)
from src.lib.core.errors import ArtifactNotFoundError, DataError
from src.schemas.reports import RunManifest


@pytest.fixture
def cache(tmp_path, records, toy_corpus):
    manifest = RunManifest(
        command="prepare",
        config={"max_doc_len": 500, "polarity_threshold": 3.0},
        seeds=[0],
        tool_version="test",
        started_at=datetime.now(timezone.utc),
    )
    directory = tmp_path / "toy" / "v1"
    write_corpus_cache(directory, records, toy_corpus, manifest)
    return directory


def test_cache_restores_the_prepared_corpus(cache, toy_corpus):
    restored = load_corpus_cache(cache)
    assert restored.vocab.digest() == toy_corpus.vocab.digest()
    assert restored.split.indices == toy_corpus.split.indices
    assert restored.user_index == toy_corpus.user_index
    assert restored.item_index == toy_corpus.item_index
    assert np.array_equal(restored.embeddings.matrix, toy_corpus.embeddings.matrix)
    for user, docs in toy_corpus.documents.items():
        mine = restored.documents[user]
        assert np.array_equal(mine.positive_tokens, docs.positive_tokens)
        assert np.array_equal(mine.negative_tokens, docs.negative_tokens)


def test_cache_rebuilds_documents_for_other_settings(cache):
    restored = load_corpus_cache(cache, max_len=2)
    for docs in restored.documents.values():
        assert len(docs.positive_tokens) <= 2
        assert len(docs.negative_tokens) <= 2


def test_cache_keeps_records_and_manifest(cache, records):
    assert read_records(cache / "records.jsonl") == records
    assert read_manifest(cache).command == "prepare"


def test_missing_cache_file(cache):
    (cache / DOCUMENTS_FILE).unlink()
    with pytest.raises(ArtifactNotFoundError):
        load_corpus_cache(cache)


def test_document_codec(toy_corpus):
    decoded = decode_documents(encode_documents(toy_corpus.documents))
    assert list(decoded) == list(toy_corpus.documents)


def test_document_codec_rejects_garbage(toy_corpus):
    data = encode_documents(toy_corpus.documents)
    with pytest.raises(DataError):
        decode_documents(b"garbage" + data)
    with pytest.raises(DataError):
        decode_documents(data[:-3])


def test_csv_and_digest(tmp_path):
    path = tmp_path / "out" / "rows.csv"
    write_csv(path, [["a", "b"], ["1", "2"]])
    assert path.read_text() == "a,b\n1,2\n"
    assert len(file_digest(path)) == 64
