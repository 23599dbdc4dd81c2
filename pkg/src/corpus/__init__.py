"""Corpus package: ingestion, splitting, documents, vocabulary, embeddings"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from ..schemas.records import DatasetSplit, InteractionRecord
from .documents import (
    DEFAULT_MAX_LEN,
    POLARITY_THRESHOLD,
    PolarityDocuments,
    build_polarity_documents,
)
from .embeddings import (
    DEFAULT_DIM,
    EmbeddingTable,
    load_embeddings,
    random_embeddings,
)
from .split import split_dataset
from .text import Vocabulary, build_vocabulary, tokenize

logger = logging.getLogger(__name__)


@dataclass
class PreparedCorpus:
    """Everything training needs, derived from the training split only"""

    split: DatasetSplit
    vocab: Vocabulary
    embeddings: EmbeddingTable
    documents: Dict[str, PolarityDocuments]
    merged_documents: Dict[str, PolarityDocuments]
    user_index: Dict[str, int]
    item_index: Dict[str, int]

    @property
    def user_ids(self) -> List[str]:
        return list(self.user_index)

    @property
    def item_ids(self) -> List[str]:
        return list(self.item_index)


def entity_index(records: List[InteractionRecord], attr: str) -> Dict[str, int]:
    """Sorted ids of the training records mapped to dense row indices"""
    keys = sorted({getattr(r, attr) for r in records})
    return {key: i for i, key in enumerate(keys)}


def assemble_corpus(
    split: DatasetSplit,
    vocab: Vocabulary,
    embeddings: EmbeddingTable,
    threshold: float = POLARITY_THRESHOLD,
    max_len: int = DEFAULT_MAX_LEN,
) -> PreparedCorpus:
    """Build documents and entity indices around a split and vocabulary"""
    return PreparedCorpus(
        split=split,
        vocab=vocab,
        embeddings=embeddings,
        documents=build_polarity_documents(split.train, vocab, threshold, max_len),
        merged_documents=build_polarity_documents(
            split.train, vocab, threshold, max_len, merge=True
        ),
        user_index=entity_index(split.train, "user_id"),
        item_index=entity_index(split.train, "item_id"),
    )


def prepare_corpus(
    records: List[InteractionRecord],
    seed: int,
    embeddings_path: Optional[Path] = None,
    embedding_dim: int = DEFAULT_DIM,
    threshold: float = POLARITY_THRESHOLD,
    max_len: int = DEFAULT_MAX_LEN,
    min_count: int = 1,
) -> PreparedCorpus:
    """
    Split records and build every training-side artifact.

    The vocabulary is indexed from training reviews only, so no validation or
    test text reaches a document.
    """
    split = split_dataset(records, seed)
    vocab = build_vocabulary((tokenize(r.review) for r in split.train), min_count)
    logger.info(f"Vocabulary holds {vocab.n_regular} tokens (min_count={min_count})")

    if embeddings_path is not None:
        embeddings = load_embeddings(embeddings_path, vocab, embedding_dim, seed)
    else:
        embeddings = random_embeddings(vocab, embedding_dim, seed)

    return assemble_corpus(split, vocab, embeddings, threshold, max_len)
