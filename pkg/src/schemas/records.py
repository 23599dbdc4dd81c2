"""Record-level schemas for corpus ingestion and splitting"""

from __future__ import annotations

from typing import Dict, List

from pydantic import BaseModel, ConfigDict, Field, field_validator

MIN_RATING = 1.0
MAX_RATING = 5.0


class InteractionRecord(BaseModel):
    """One (user, item, rating, review) observation"""

    model_config = ConfigDict(frozen=True)

    user_id: str = Field(description="Opaque user key")
    item_id: str = Field(description="Opaque item key")
    rating: float = Field(ge=MIN_RATING, le=MAX_RATING, description="Star rating")
    review: str = Field(min_length=1, description="Review text")

    @field_validator("review")
    @classmethod
    def review_not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("review is empty after whitespace trim")
        return value


class FieldSchema(BaseModel):
    """Field names of one line-oriented review dump"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    user: str = Field(default="reviewerID", description="User id field")
    item: str = Field(default="asin", description="Item id field")
    rating: str = Field(default="overall", description="Rating field")
    review: str = Field(default="reviewText", description="Review text field")


AMAZON_SCHEMA = FieldSchema()
YELP_SCHEMA = FieldSchema(
    user="user_id", item="business_id", rating="stars", review="text"
)
SCHEMA_PRESETS: Dict[str, FieldSchema] = {
    "amazon": AMAZON_SCHEMA,
    "yelp": YELP_SCHEMA,
}


class IngestSummary(BaseModel):
    """Counters reported alongside ingested records"""

    kept: int = 0
    dropped_empty: int = 0
    dropped_range: int = 0

    @property
    def total(self) -> int:
        return self.kept + self.dropped_empty + self.dropped_range


class DatasetSplit(BaseModel):
    """Train / validation / test partition of one record list"""

    model_config = ConfigDict(frozen=True)

    seed: int
    train: List[InteractionRecord]
    validation: List[InteractionRecord]
    test: List[InteractionRecord]
    indices: Dict[str, List[int]] = Field(
        description="Input positions of the records in each partition"
    )

    @property
    def sizes(self) -> Dict[str, int]:
        return {name: len(ids) for name, ids in self.indices.items()}


class DatasetStatistics(BaseModel):
    """Corpus summary in the shape of a dataset statistics table"""

    n_users: int
    n_items: int
    n_ratings: int
    density: float
    positive_fraction: float
    imbalance_histogram: List[int] = Field(
        description="Users bucketed by their positive-review fraction, in tenths"
    )
