"""Ablation wirings"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from ..corpus import PreparedCorpus
from ..lib.core.errors import ConfigError
from ..model.rpr import document_table
from ..model.wiring import VariantWiring
from ..schemas.config import TrainConfig, Variant

VARIANT_WIRINGS: Dict[Variant, VariantWiring] = {
    Variant.BASE: VariantWiring(name=Variant.BASE.value),
    Variant.COARSE_GRAINED: VariantWiring(
        name=Variant.COARSE_GRAINED.value, pooling="max"
    ),
    Variant.NO_POLARITY: VariantWiring(
        name=Variant.NO_POLARITY.value, merge_polarity=True
    ),
    Variant.UNIFORM_IMPORTANCE: VariantWiring(
        name=Variant.UNIFORM_IMPORTANCE.value, uniform_importance=True
    ),
    Variant.NO_OFFSET: VariantWiring(name=Variant.NO_OFFSET.value, use_offset=False),
}


def wiring_for(variant: str) -> VariantWiring:
    try:
        return VARIANT_WIRINGS[Variant(variant)]
    except ValueError:
        raise ConfigError(f"unknown variant '{variant}'") from None


def make_variant(config: TrainConfig) -> VariantWiring:
    return wiring_for(config.variant)


def variant_documents(
    corpus: PreparedCorpus, wiring: VariantWiring
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Document table a wiring reads: merged reviews when polarity is dropped"""
    source = corpus.merged_documents if wiring.merge_polarity else corpus.documents
    return document_table(source, corpus.user_index)
