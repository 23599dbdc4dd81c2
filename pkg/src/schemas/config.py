"""Configuration schemas for training, synthesis and hyper-parameter search"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..lib.core.errors import ConfigError


class Variant(str, Enum):
    """Model wirings: the full model and its four ablations"""

    BASE = "base"
    COARSE_GRAINED = "coarse_grained"
    NO_POLARITY = "no_polarity"
    UNIFORM_IMPORTANCE = "uniform_importance"
    NO_OFFSET = "no_offset"


# Reporting order of the ablation table
VARIANT_ORDER = (
    Variant.BASE,
    Variant.COARSE_GRAINED,
    Variant.NO_POLARITY,
    Variant.UNIFORM_IMPORTANCE,
    Variant.NO_OFFSET,
)


class RegConfig(BaseModel):
    """Regularization weights of the objective"""

    model_config = ConfigDict(frozen=True)

    beta1: float = Field(default=0.0, ge=0.0, description="L1 weight on M and V")
    beta2: float = Field(default=0.0, ge=0.0, description="L2 weight on the rest")


class TrainConfig(BaseModel):
    """Every hyper-parameter of one training run"""

    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    # Model dimensions
    n_factors: int = Field(default=32, ge=1, description="Latent dimension f")
    n_preferred: int = Field(default=3, ge=1, description="User-preferred aspects")
    n_rejected: int = Field(default=3, ge=1, description="User-rejected aspects")
    n_filters: int = Field(default=50, ge=1, description="Convolution filters")
    filter_width: int = Field(default=3, ge=1, description="Convolution width c")
    embedding_dim: int = Field(default=50, ge=1, description="Word vector size d")
    attention_hidden: int = Field(default=32, ge=1, description="Attention width")

    # Optimisation
    learning_rate: float = Field(default=1e-3, ge=0.0, description="Adam step size")
    batch_size: int = Field(default=100, ge=1, description="Mini-batch size")
    max_epochs: int = Field(default=50, ge=1, description="Epoch limit")
    patience: int = Field(default=5, ge=1, description="Early-stop patience")
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(default=1e-8, gt=0.0)
    clip_norm: Optional[float] = Field(
        default=5.0, gt=0.0, description="Global gradient-norm clip (None disables)"
    )
    epoch_schedule: bool = Field(
        default=False, description="Alternate parameter groups per epoch"
    )

    # Regularization
    beta1: float = Field(default=1e-4, ge=0.0, description="L1 weight on M and V")
    beta2: float = Field(default=1e-4, ge=0.0, description="L2 weight on the rest")

    # Model switches
    variant: Variant = Field(default=Variant.BASE)
    dropout: float = Field(default=0.2, ge=0.0, lt=1.0)
    use_dropout: bool = Field(default=True)
    freeze_embeddings: bool = Field(default=False)

    # Corpus
    # None keeps the values the corpus cache was prepared with (500, 3.0)
    max_doc_len: Optional[int] = Field(
        default=None, ge=1, description="Tokens per document"
    )
    polarity_threshold: Optional[float] = Field(
        default=None, description="Positive cutoff"
    )

    seed: int = Field(default=0, ge=0)

    @field_validator("filter_width")
    @classmethod
    def width_is_odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("filter width must be odd")
        return value

    @field_validator("variant", mode="before")
    @classmethod
    def known_variant(cls, value: Any) -> Any:
        if isinstance(value, str) and value not in {v.value for v in Variant}:
            raise ValueError(f"unknown variant '{value}'")
        return value

    @property
    def reg(self) -> RegConfig:
        return RegConfig(beta1=self.beta1, beta2=self.beta2)

    def with_overrides(self, **overrides: Any) -> "TrainConfig":
        """Copy with fields replaced, re-validated"""
        data = self.model_dump()
        data.update({k: v for k, v in overrides.items() if v is not None})
        return build_config(data)


def build_config(data: Dict[str, Any]) -> TrainConfig:
    """Validate a flat mapping into a TrainConfig, raising ConfigError"""
    try:
        return TrainConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid training config: {e}") from e


def load_config(path: Path) -> TrainConfig:
    """Load a flat YAML mapping whose keys are TrainConfig fields"""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config file {path} is not valid YAML: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a flat mapping")
    nested = [key for key, value in data.items() if isinstance(value, (dict, list))]
    if nested:
        raise ConfigError(f"config keys must be flat, got nested values for {nested}")
    return build_config(data)


class SyntheticConfig(BaseModel):
    """Planted-structure corpus generator settings"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_users: int = Field(default=500)
    n_items: int = Field(default=200)
    n_aspects: int = Field(default=2)
    imbalance_ratio: float = Field(
        default=0.5, description="Fraction of positive reviews per user"
    )
    noise: float = Field(default=0.0, ge=0.0, description="Rating noise std")
    seed: int = Field(default=0, ge=0)
    reviews_per_user: int = Field(default=20, ge=1)
    words_per_review: int = Field(default=12, ge=1)
    pool_size: int = Field(default=8, ge=1, description="Words per aspect pool")
    filler_size: int = Field(default=20, ge=0, description="Aspect-neutral words")
    uniform_importance: bool = Field(
        default=False, description="Plant uniform user importance"
    )


class GridSpec(BaseModel):
    """Finite hyper-parameter grid; each list spans one axis"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_factors: List[int] = Field(default_factory=lambda: [32])
    n_aspects: List[int] = Field(default_factory=lambda: [3])
    learning_rate: List[float] = Field(default_factory=lambda: [1e-3])
    batch_size: List[int] = Field(default_factory=lambda: [100])

    @property
    def size(self) -> int:
        return (
            len(self.n_factors)
            * len(self.n_aspects)
            * len(self.learning_rate)
            * len(self.batch_size)
        )


GRID_PRESETS: Dict[str, GridSpec] = {
    "aspects": GridSpec(n_factors=[32], n_aspects=[1, 2, 3, 4, 5]),
    "factors": GridSpec(n_factors=[4, 8, 16, 32, 64], n_aspects=[3]),
    "joint": GridSpec(n_factors=[4, 8, 16, 32, 64], n_aspects=[1, 2, 3, 4, 5]),
    "full": GridSpec(
        n_factors=[4, 8, 16, 32, 64],
        n_aspects=[1, 2, 3, 4, 5],
        learning_rate=[1e-5, 1e-4, 1e-3, 1e-2],
        batch_size=[100, 200, 500, 1000],
    ),
}
