"""Reproducible train / validation / test splitting with coverage repair"""

from __future__ import annotations

import hashlib
import logging
import math
from typing import Dict, List, Set

import numpy as np

from ..lib.core.errors import DataError, SplitInfeasibleError
from ..schemas.records import DatasetSplit, InteractionRecord

logger = logging.getLogger(__name__)


def stable_pair_hash(user_id: str, item_id: str) -> int:
    """Machine-independent hash of a (user, item) pair"""
    digest = hashlib.blake2b(
        f"{user_id}\x1f{item_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "big")


def split_dataset(
    records: List[InteractionRecord],
    seed: int,
    train_frac: float = 0.8,
    val_frac_of_train: float = 0.1,
) -> DatasetSplit:
    """
    Split records so that every user and item appears in training.

    A seeded permutation assigns ``round(n * train_frac)`` records to the
    training side, of which ``floor(n_train * val_frac_of_train)`` are held out
    for validation. Afterwards each user or item missing from train gets one of
    its validation/test records moved into train, picking the record with the
    smallest stable pair hash.
    """
    if not records:
        raise DataError("cannot split an empty record list")

    n = len(records)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)

    n_train_side = min(n, math.floor(n * train_frac + 0.5))
    n_val = math.floor(n_train_side * val_frac_of_train)
    n_fit = n_train_side - n_val
    train: Set[int] = {int(i) for i in order[:n_fit]}
    validation: Set[int] = {int(i) for i in order[n_fit:n_train_side]}
    test: Set[int] = {int(i) for i in order[n_train_side:]}

    _repair_coverage(records, train, validation, test)

    parts: Dict[str, List[int]] = {
        "train": sorted(train),
        "validation": sorted(validation),
        "test": sorted(test),
    }
    logger.info(
        f"Split {n} records (seed {seed}): train={len(train)} "
        f"validation={len(validation)} test={len(test)}"
    )
    return DatasetSplit(
        seed=seed,
        train=[records[i] for i in parts["train"]],
        validation=[records[i] for i in parts["validation"]],
        test=[records[i] for i in parts["test"]],
        indices=parts,
    )


def _repair_coverage(
    records: List[InteractionRecord],
    train: Set[int],
    validation: Set[int],
    test: Set[int],
) -> None:
    by_user: Dict[str, List[int]] = {}
    by_item: Dict[str, List[int]] = {}
    for idx, rec in enumerate(records):
        by_user.setdefault(rec.user_id, []).append(idx)
        by_item.setdefault(rec.item_id, []).append(idx)

    covered_users = {records[i].user_id for i in train}
    covered_items = {records[i].item_id for i in train}

    def hash_of(idx: int) -> int:
        return stable_pair_hash(records[idx].user_id, records[idx].item_id)

    for kind, groups, covered in (
        ("user", by_user, covered_users),
        ("item", by_item, covered_items),
    ):
        for key in sorted(groups):
            if key in covered:
                continue
            candidates = sorted(
                (i for i in groups[key] if i in validation or i in test),
                key=lambda i: (hash_of(i), i),
            )
            chosen = None
            for idx in candidates:
                if idx in test and len(test) == 1:
                    continue
                chosen = idx
                break
            if chosen is None:
                raise SplitInfeasibleError(
                    f"{kind} {key!r} cannot be covered by train without "
                    "emptying the test partition"
                )

            validation.discard(chosen)
            test.discard(chosen)
            train.add(chosen)
            covered_users.add(records[chosen].user_id)
            covered_items.add(records[chosen].item_id)
            logger.debug(f"Moved record {chosen} into train to cover {kind} {key!r}")
