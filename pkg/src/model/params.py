"""Learnable parameter container and its typed views"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Mapping, NamedTuple, Tuple

import numpy as np

from ..kernel.tape import ArrayLike, Tape

# Update groups, optimised in this order on every batch
GROUP_ORDER: Tuple[str, ...] = ("users", "items", "indicators", "remaining")

PARAM_GROUPS: Dict[str, Tuple[str, ...]] = {
    "users": ("P",),
    "items": ("Q",),
    "indicators": ("M", "V"),
    "remaining": (
        "conv.K",
        "conv.b",
        "head_p.W",
        "head_p.b",
        "head_r.W",
        "head_r.b",
        "att.W",
        "att.b",
        "att.h",
        "embeddings",
    ),
}

# L2-regularised set besides the touched latent rows; embeddings excluded
THETA: Tuple[str, ...] = PARAM_GROUPS["remaining"][:-1]


@dataclass(frozen=True)
class ModelDims:
    """Sizes fixing every parameter shape"""

    n_users: int
    n_items: int
    n_factors: int
    n_preferred: int
    n_rejected: int
    n_filters: int
    filter_width: int
    embedding_dim: int
    attention_hidden: int
    vocab_size: int

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        f = self.n_factors
        return {
            "P": (self.n_users, f),
            "Q": (self.n_items, f),
            "M": (f, self.n_preferred),
            "V": (f, self.n_rejected),
            "conv.K": (self.n_filters, self.filter_width, self.embedding_dim),
            "conv.b": (self.n_filters,),
            "head_p.W": (self.n_preferred, self.n_filters),
            "head_p.b": (self.n_preferred,),
            "head_r.W": (self.n_rejected, self.n_filters),
            "head_r.b": (self.n_rejected,),
            "att.W": (self.attention_hidden, f),
            "att.b": (self.attention_hidden,),
            "att.h": (self.attention_hidden,),
            "embeddings": (self.vocab_size, self.embedding_dim),
        }


@dataclass
class ModelParams:
    """Every learnable array of the model, keyed by parameter name"""

    dims: ModelDims
    arrays: Dict[str, np.ndarray]
    vocab_digest: str = ""
    trainable_embeddings: bool = True
    extra: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    @property
    def pad_index(self) -> int:
        return self.dims.vocab_size - 1

    def group(self, name: str) -> Dict[str, np.ndarray]:
        """Arrays of one update group (shared, not copied)"""
        return {key: self.arrays[key] for key in PARAM_GROUPS[name]}

    def copy(self) -> "ModelParams":
        return ModelParams(
            dims=self.dims,
            arrays={k: v.copy() for k, v in self.arrays.items()},
            vocab_digest=self.vocab_digest,
            trainable_embeddings=self.trainable_embeddings,
            extra=dict(self.extra),
        )

    def view(self) -> "ModelView":
        return ModelView.from_mapping(self.arrays)

    def watch(self, tape: Tape) -> "ModelView":
        """Register every array on a tape and return tracked views"""
        return ModelView.from_mapping(
            {name: tape.watch(name, array) for name, array in self.arrays.items()}
        )


class LatentFactors(NamedTuple):
    P: ArrayLike
    Q: ArrayLike


class AspectIndicators(NamedTuple):
    M: ArrayLike
    V: ArrayLike


class ConvLayer(NamedTuple):
    K: ArrayLike
    b: ArrayLike


class ImportanceHead(NamedTuple):
    W: ArrayLike
    b: ArrayLike


class AttentionNet(NamedTuple):
    W: ArrayLike
    b: ArrayLike
    h: ArrayLike


class ModelView(NamedTuple):
    """Typed access to a parameter mapping of arrays or tensors"""

    latent: LatentFactors
    indicators: AspectIndicators
    conv: ConvLayer
    head_p: ImportanceHead
    head_r: ImportanceHead
    attention: AttentionNet
    embeddings: ArrayLike
    mapping: Mapping[str, ArrayLike]

    @classmethod
    def from_mapping(cls, m: Mapping[str, ArrayLike]) -> "ModelView":
        return cls(
            latent=LatentFactors(m["P"], m["Q"]),
            indicators=AspectIndicators(m["M"], m["V"]),
            conv=ConvLayer(m["conv.K"], m["conv.b"]),
            head_p=ImportanceHead(m["head_p.W"], m["head_p.b"]),
            head_r=ImportanceHead(m["head_r.W"], m["head_r.b"]),
            attention=AttentionNet(m["att.W"], m["att.b"], m["att.h"]),
            embeddings=m["embeddings"],
            mapping=m,
        )

    def head(self, positive: bool) -> ImportanceHead:
        return self.head_p if positive else self.head_r
