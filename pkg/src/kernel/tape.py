"""
Reverse-mode gradient tape.

A ``Tensor`` wraps a float64 array. Operations whose operands belong to a
``Tape`` record a backward closure on it; operands without a tape are
constants, so the same model code serves both training and inference.
Replaying the records in reverse order visits every node after all of its
consumers, which is a reverse topological order because records are
appended as values are produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..lib.core.errors import ShapeError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union["Tensor", np.ndarray, float, int]


class Tensor:
    """Immutable array value, optionally tracked by a tape"""

    __slots__ = ("value", "tape", "node", "name")

    def __init__(
        self,
        value: np.ndarray,
        tape: Optional["Tape"] = None,
        node: int = -1,
        name: Optional[str] = None,
    ):
        self.value = value
        self.tape = tape
        self.node = node
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, tracked={self.tracked})"


def as_tensor(x: ArrayLike) -> Tensor:
    """Wrap arrays and scalars as untracked constants"""
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


@dataclass
class _Record:
    output: int
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn


class Tape:
    """Ordered record of primitive applications for one training step"""

    def __init__(self):
        self._records: List[_Record] = []
        self._params: Dict[str, Tensor] = {}
        self._next_node = 0

    def __len__(self) -> int:
        return len(self._records)

    def _new_node(self) -> int:
        node = self._next_node
        self._next_node += 1
        return node

    def watch(self, name: str, array: np.ndarray) -> Tensor:
        """Register a parameter whose gradient will be reported under name"""
        if name in self._params:
            raise ValueError(f"parameter '{name}' is already watched")
        tensor = Tensor(array, tape=self, node=self._new_node(), name=name)
        self._params[name] = tensor
        return tensor

    def record(
        self, value: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn
    ) -> Tensor:
        out = Tensor(value, tape=self, node=self._new_node())
        self._records.append(_Record(out.node, tuple(inputs), backward))
        return out

    def gradients(self, root: Tensor) -> Dict[str, np.ndarray]:
        """
        Gradients of a scalar root with respect to every watched parameter.

        Parameters that do not influence the root get zero gradients.
        """
        if root.tape is not self:
            raise ValueError("root tensor was not produced on this tape")
        if root.value.size != 1:
            raise ShapeError(f"gradient root must be scalar, got {root.shape}")

        adjoints: Dict[int, np.ndarray] = {root.node: np.ones_like(root.value)}
        for rec in reversed(self._records):
            g_out = adjoints.pop(rec.output, None)
            if g_out is None:
                continue
            grads = rec.backward(g_out)
            for tensor, grad in zip(rec.inputs, grads):
                if grad is None or tensor.tape is not self:
                    continue
                if grad.shape != tensor.shape:
                    raise ShapeError(
                        f"gradient shape {grad.shape} does not match {tensor.shape}"
                    )
                prev = adjoints.get(tensor.node)
                adjoints[tensor.node] = grad if prev is None else prev + grad

        return {
            name: adjoints.get(t.node, np.zeros_like(t.value))
            for name, t in self._params.items()
        }


def tape_of(*operands: Tensor) -> Optional[Tape]:
    """First tape among the operands, None when all are constants"""
    for t in operands:
        if t.tape is not None:
            return t.tape
    return None
