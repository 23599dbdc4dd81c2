"""Line-oriented review dump ingestion and record filters"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from typing import Iterable, List, Tuple, Union

from ..lib.core.errors import RecordParseError, RecordSchemaError
from ..schemas.records import (
    AMAZON_SCHEMA,
    MAX_RATING,
    MIN_RATING,
    DatasetStatistics,
    FieldSchema,
    IngestSummary,
    InteractionRecord,
)

logger = logging.getLogger(__name__)


def ingest_records(
    source: Iterable[Union[str, bytes]], schema: FieldSchema = AMAZON_SCHEMA
) -> Tuple[List[InteractionRecord], IngestSummary]:
    """
    Decode one JSON object per line into InteractionRecords.

    Records with an empty review or a rating outside [1, 5] are dropped and
    counted; blank lines are skipped.

    Args:
        source: Iterable of text or UTF-8 byte lines (a file opened in binary
            mode keeps undecodable lines attributable)
        schema: Field names of the dump

    Returns:
        Records in input order and the ingestion counters
    """
    records: List[InteractionRecord] = []
    summary = IngestSummary()

    for line_no, raw in enumerate(source, start=1):
        try:
            line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        except UnicodeDecodeError as e:
            raise RecordParseError(line_no, f"invalid UTF-8 at byte {e.start}") from e
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise RecordParseError(line_no, e.msg) from e
        if not isinstance(obj, dict):
            raise RecordParseError(line_no, "not an object")

        for field in (schema.user, schema.item, schema.rating, schema.review):
            if field not in obj:
                raise RecordSchemaError(line_no, field)

        try:
            rating = float(obj[schema.rating])
        except (TypeError, ValueError) as e:
            raise RecordSchemaError(line_no, schema.rating, "non-numeric") from e

        review = obj[schema.review]
        if review is None or not str(review).strip():
            summary.dropped_empty += 1
            continue
        if not math.isfinite(rating) or not MIN_RATING <= rating <= MAX_RATING:
            summary.dropped_range += 1
            continue

        records.append(
            InteractionRecord(
                user_id=str(obj[schema.user]),
                item_id=str(obj[schema.item]),
                rating=rating,
                review=str(review),
            )
        )
        summary.kept += 1

    logger.info(
        f"Ingested {summary.kept} records "
        f"(dropped {summary.dropped_empty} empty, {summary.dropped_range} out of range)"
    )
    return records, summary


def k_core(records: List[InteractionRecord], k: int) -> List[InteractionRecord]:
    """Iteratively drop records until every user and item has >= k records"""
    if k <= 1:
        return list(records)

    kept = list(records)
    while True:
        users = Counter(r.user_id for r in kept)
        items = Counter(r.item_id for r in kept)
        filtered = [r for r in kept if users[r.user_id] >= k and items[r.item_id] >= k]
        if len(filtered) == len(kept):
            break
        kept = filtered

    logger.info(f"{k}-core filter kept {len(kept)} of {len(records)} records")
    return kept


def dataset_statistics(
    records: List[InteractionRecord], threshold: float = 3.0
) -> DatasetStatistics:
    """Counts, density and per-user polarity imbalance of a record list"""
    users = {r.user_id for r in records}
    items = {r.item_id for r in records}
    n = len(records)

    per_user_total: Counter[str] = Counter()
    per_user_pos: Counter[str] = Counter()
    for r in records:
        per_user_total[r.user_id] += 1
        if r.rating >= threshold:
            per_user_pos[r.user_id] += 1

    histogram = [0] * 10
    for user, total in per_user_total.items():
        fraction = per_user_pos[user] / total
        histogram[min(int(fraction * 10), 9)] += 1

    cells = len(users) * len(items)
    return DatasetStatistics(
        n_users=len(users),
        n_items=len(items),
        n_ratings=n,
        density=n / cells if cells else 0.0,
        positive_fraction=sum(per_user_pos.values()) / n if n else 0.0,
        imbalance_histogram=histogram,
    )
