"""Pretrained word vector loading"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Set

import numpy as np

from ..lib.core.errors import ConfigError, EmbeddingFormatError
from .text import Vocabulary

logger = logging.getLogger(__name__)

DEFAULT_DIM = 50


@dataclass
class EmbeddingTable:
    """|vocab| x d word vectors; the PAD row is zero and never trained"""

    matrix: np.ndarray
    pad_index: int
    coverage: float = 0.0

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return int(self.matrix.shape[0])


def random_embeddings(
    vocab: Vocabulary, d: int = DEFAULT_DIM, seed: int = 0
) -> EmbeddingTable:
    """Small-uniform table in [-0.5/d, 0.5/d] with a zero PAD row"""
    if d <= 0:
        raise ConfigError(f"embedding dimension must be positive, got {d}")
    rng = np.random.default_rng(seed)
    bound = 0.5 / d
    matrix = rng.uniform(-bound, bound, size=(len(vocab), d))
    matrix[vocab.pad_index] = 0.0
    return EmbeddingTable(matrix=matrix, pad_index=vocab.pad_index, coverage=0.0)


def load_embeddings(
    path: Path,
    vocab: Vocabulary,
    d: int = DEFAULT_DIM,
    seed: int = 0,
    config_dim: Optional[int] = None,
) -> EmbeddingTable:
    """
    Load vectors in the plain ``token v1 ... v_d`` text format.

    Vocabulary tokens found in the file copy their vector exactly; tokens
    absent from the file keep a seeded small-uniform row; file tokens outside
    the vocabulary are skipped.

    Args:
        path: Vector file
        vocab: Target vocabulary
        d: Vector dimension of the file
        seed: Seed of the rows not covered by the file
        config_dim: Dimension the model is configured for, when known

    Returns:
        Embedding table with the coverage ratio over regular tokens
    """
    if config_dim is not None and config_dim != d:
        raise ConfigError(
            f"embedding dimension {d} does not match configured {config_dim}"
        )

    table = random_embeddings(vocab, d, seed)
    found: Set[int] = set()
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise EmbeddingFormatError(
                    line_no, detail=f"invalid UTF-8 at byte {e.start}"
                ) from e
            parts = line.rstrip("\r\n").rstrip(" ").split(" ")
            if len(parts) == 1 and not parts[0]:
                continue
            token, values = parts[0], parts[1:]
            if len(values) != d:
                raise EmbeddingFormatError(line_no, d, len(values))
            index = vocab.token_to_index.get(token)
            if index is None or index >= vocab.oov_index:
                continue
            try:
                table.matrix[index] = np.array(values, dtype=np.float64)
            except ValueError as e:
                raise EmbeddingFormatError(line_no, d, len(values)) from e
            found.add(index)

    table.coverage = len(found) / vocab.n_regular if vocab.n_regular else 0.0
    logger.info(
        f"Loaded {len(found)} of {vocab.n_regular} vocabulary vectors from {path} "
        f"(coverage {table.coverage:.1%})"
    )
    return table
