"""
Tokenization and vocabulary indexing.

Tokens are lowercased, punctuation is stripped except hyphens and
apostrophes joining two word characters ("cost-effective", "don't").
"""

from __future__ import annotations

import hashlib
import unicodedata
from collections import Counter
from typing import Dict, Iterable, List, Sequence

import numpy as np

OOV_TOKEN = "<OOV>"
PAD_TOKEN = "<PAD>"

_JOINERS = frozenset("-'’")


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def tokenize(text: str) -> List[str]:
    """Split review text into lowercase word tokens"""
    if not text:
        return []

    text = text.lower()
    chars = []
    last = len(text) - 1
    for pos, ch in enumerate(text):
        if unicodedata.category(ch).startswith("P"):
            intra_word = (
                ch in _JOINERS
                and 0 < pos < last
                and _is_word_char(text[pos - 1])
                and _is_word_char(text[pos + 1])
            )
            chars.append(ch if intra_word else " ")
        else:
            chars.append(ch)
    return "".join(chars).split()


class Vocabulary:
    """
    Bijective token/index map with two trailing special entries.

    Regular tokens occupy indices ``0..n-1``; the OOV and PAD indices
    follow them.
    """

    def __init__(self, tokens: Sequence[str]):
        self.index_to_token: List[str] = list(tokens) + [OOV_TOKEN, PAD_TOKEN]
        self.token_to_index: Dict[str, int] = {
            tok: i for i, tok in enumerate(self.index_to_token)
        }
        if len(self.token_to_index) != len(self.index_to_token):
            raise ValueError("vocabulary tokens must be unique")
        self.oov_index = len(tokens)
        self.pad_index = len(tokens) + 1

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        index = self.token_to_index.get(token)
        return index is not None and index < self.oov_index

    @property
    def n_regular(self) -> int:
        return self.oov_index

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        oov = self.oov_index
        return np.fromiter(
            (self.token_to_index.get(tok, oov) for tok in tokens), dtype=np.int64
        )

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.index_to_token[int(i)] for i in ids]

    def to_lines(self) -> List[str]:
        """``token\\tindex`` lines, regular tokens then specials"""
        return [f"{tok}\t{i}" for i, tok in enumerate(self.index_to_token)]

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Vocabulary":
        entries = []
        for line in lines:
            line = line.rstrip("\n")
            if not line:
                continue
            token, index = line.rsplit("\t", 1)
            entries.append((int(index), token))
        entries.sort()
        tokens = [tok for _, tok in entries]
        if tokens[-2:] != [OOV_TOKEN, PAD_TOKEN]:
            raise ValueError("vocabulary listing lacks trailing special entries")
        return cls(tokens[:-2])

    def digest(self) -> str:
        """Content hash binding checkpoints to this vocabulary"""
        h = hashlib.sha256()
        for line in self.to_lines():
            h.update(line.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()


def build_vocabulary(
    documents: Iterable[Sequence[str]], min_count: int = 1
) -> Vocabulary:
    """
    Index tokens with frequency >= min_count.

    Order is descending frequency, ties broken lexicographically.
    """
    counts: Counter[str] = Counter()
    for doc in documents:
        counts.update(doc)
    kept = [(tok, n) for tok, n in counts.items() if n >= min_count]
    kept.sort(key=lambda pair: (-pair[1], pair[0]))
    return Vocabulary([tok for tok, _ in kept])
