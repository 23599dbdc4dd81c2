"""Switches distinguishing the full model from its ablations"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal


@dataclass(frozen=True)
class VariantWiring:
    """
    How importance is extracted and combined.

    pooling: ``sum`` adds per-word head outputs, ``max`` max-pools the
        convolution features before the head.
    merge_polarity: one merged document feeds both heads.
    uniform_importance: enhanced importance replaced by uniform vectors.
    use_offset: apply the attention-derived importance offsets.
    """

    name: str = "base"
    pooling: Literal["sum", "max"] = "sum"
    merge_polarity: bool = False
    uniform_importance: bool = False
    use_offset: bool = True


BASE_WIRING = VariantWiring()
