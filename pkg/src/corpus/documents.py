"""Per-user polarity documents built from training reviews"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping

import numpy as np

from ..schemas.records import InteractionRecord
from .text import Vocabulary, tokenize

logger = logging.getLogger(__name__)

DEFAULT_MAX_LEN = 500
POLARITY_THRESHOLD = 3.0

_EMPTY = np.zeros(0, dtype=np.int64)


@dataclass(frozen=True)
class PolarityDocuments:
    """A user's concatenated positive and negative reviews as token ids"""

    user_id: str
    positive_tokens: np.ndarray = field(default_factory=lambda: _EMPTY)
    negative_tokens: np.ndarray = field(default_factory=lambda: _EMPTY)

    def tokens(self, positive: bool) -> np.ndarray:
        return self.positive_tokens if positive else self.negative_tokens


def build_polarity_documents(
    train_records: Iterable[InteractionRecord],
    vocab: Vocabulary,
    threshold: float = POLARITY_THRESHOLD,
    max_len: int = DEFAULT_MAX_LEN,
    merge: bool = False,
) -> Dict[str, PolarityDocuments]:
    """
    Concatenate each user's training reviews by polarity.

    A record with ``rating >= threshold`` extends the positive sequence,
    otherwise the negative one. Reviews are concatenated in input order and
    each sequence keeps its most recent ``max_len`` tokens. With ``merge`` the
    threshold is ignored and every review extends both sequences.

    Only training records may be passed; validation and test reviews are
    unavailable at prediction time.
    """
    pieces: Dict[str, tuple[List[np.ndarray], List[np.ndarray]]] = {}
    for rec in train_records:
        ids = vocab.encode(tokenize(rec.review))
        pos, neg = pieces.setdefault(rec.user_id, ([], []))
        if merge:
            pos.append(ids)
            neg.append(ids)
        elif rec.rating >= threshold:
            pos.append(ids)
        else:
            neg.append(ids)

    documents: Dict[str, PolarityDocuments] = {}
    for user_id in sorted(pieces):
        pos, neg = pieces[user_id]
        documents[user_id] = PolarityDocuments(
            user_id=user_id,
            positive_tokens=_join_recent(pos, max_len),
            negative_tokens=_join_recent(neg, max_len),
        )

    logger.info(
        f"Built {'merged' if merge else 'polarity'} documents for "
        f"{len(documents)} users (max_len={max_len})"
    )
    return documents


def lookup_documents(
    documents: Mapping[str, PolarityDocuments], user_id: str
) -> PolarityDocuments:
    """Documents of a user, two empty sequences when the user has none"""
    return documents.get(user_id) or PolarityDocuments(user_id=user_id)


def _join_recent(parts: List[np.ndarray], max_len: int) -> np.ndarray:
    if not parts:
        return _EMPTY
    joined = np.concatenate(parts)
    return joined[-max_len:] if len(joined) > max_len else joined
