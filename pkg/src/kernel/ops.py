"""
Differentiable primitives over float64 tensors.

Every function accepts tensors or plain arrays (treated as constants) and
records its backward closure when any operand is tracked. Shapes must agree
exactly; there is no general broadcasting. The rectifier's subgradient at 0
is 0.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..lib.core.errors import ShapeError, TokenIndexError
from .tape import ArrayLike, BackwardFn, Tensor, as_tensor, tape_of


def _emit(value: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    tape = tape_of(*inputs)
    if tape is None:
        return Tensor(value)
    return tape.record(value, inputs, backward)


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("add", a, b)
    return _emit(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("sub", a, b)
    return _emit(a.value - b.value, (a, b), lambda g: (g, -g))


def elementwise_product(a: ArrayLike, b: ArrayLike) -> Tensor:
    """c_i = a_i * b_i"""
    a, b = as_tensor(a), as_tensor(b)
    _same_shape("elementwise_product", a, b)
    av, bv = a.value, b.value
    return _emit(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: ArrayLike, factor: float) -> Tensor:
    a = as_tensor(a)
    return _emit(a.value * factor, (a,), lambda g: (g * factor,))


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    active = a.value > 0
    return _emit(np.where(active, a.value, 0.0), (a,), lambda g: (g * active,))


def transpose(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if a.value.ndim != 2:
        raise ShapeError(f"transpose expects a matrix, got {a.shape}")
    return _emit(a.value.T.copy(), (a,), lambda g: (g.T.copy(),))


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """
    Contract the last axis of ``a`` with the first axis of ``b``.

    ``b`` is a matrix (k, n) or a vector (k,); ``a`` may carry any number of
    leading axes.
    """
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value
    if av.ndim == 0 or bv.ndim not in (1, 2) or av.shape[-1] != bv.shape[0]:
        raise ShapeError(f"matmul: cannot contract {a.shape} with {b.shape}")
    k = bv.shape[0]

    def backward(g: np.ndarray):
        flat_a = av.reshape(-1, k)
        if bv.ndim == 2:
            n = bv.shape[1]
            return g @ bv.T, flat_a.T @ g.reshape(-1, n)
        return g[..., None] * bv, flat_a.T @ g.reshape(-1)

    return _emit(av @ bv, (a, b), backward)


def gather_rows(table: ArrayLike, ids: np.ndarray) -> Tensor:
    """Rows of a 2-D table selected by integer ids (embedding lookup)"""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    n_rows = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n_rows):
        raise TokenIndexError(f"row id outside table of {n_rows} rows")
    tv = table.value

    def backward(g: np.ndarray):
        grad = np.zeros_like(tv)
        np.add.at(grad, ids, g)
        return (grad,)

    return _emit(tv[ids], (table,), backward)


def stack(tensors: Sequence[ArrayLike]) -> Tensor:
    """Stack equally shaped tensors along a new leading axis"""
    items = [as_tensor(t) for t in tensors]
    if not items:
        raise ShapeError("stack needs at least one tensor")
    for t in items[1:]:
        _same_shape("stack", items[0], t)

    def backward(g: np.ndarray):
        return tuple(g[i] for i in range(len(items)))

    return _emit(np.stack([t.value for t in items]), items, backward)


def reduce_sum(a: ArrayLike, axis: Optional[int] = None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape

    def backward(g: np.ndarray):
        if axis is None:
            return (np.full(shape, float(g)),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    value = a.value.sum(axis=axis)
    return _emit(np.asarray(value, dtype=np.float64), (a,), backward)


def reduce_max(a: ArrayLike) -> Tensor:
    """
    Max over the rows of a matrix, per column; a leading batch axis is kept.
    The gradient goes to the first argmax.
    """
    a = as_tensor(a)
    if a.value.ndim not in (2, 3) or a.shape[-2] == 0:
        raise ShapeError(f"reduce_max expects non-empty matrices, got {a.shape}")
    rows = np.expand_dims(a.value.argmax(axis=-2), -2)

    def backward(g: np.ndarray):
        grad = np.zeros(a.shape)
        np.put_along_axis(grad, rows, np.expand_dims(g, -2), axis=-2)
        return (grad,)

    value = np.take_along_axis(a.value, rows, axis=-2).squeeze(-2)
    return _emit(value, (a,), backward)


def softmax(v: ArrayLike, axis: int = -1) -> Tensor:
    """Max-shifted softmax along one axis"""
    v = as_tensor(v)
    if v.value.size == 0:
        raise ShapeError("softmax of an empty tensor")
    shifted = v.value - v.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _emit(y, (v,), backward)


def linear_relu(x: ArrayLike, W: ArrayLike, b: ArrayLike) -> Tensor:
    """
    ReLU(W x + b) applied over the last axis of x.

    Args:
        x: (..., n_in)
        W: (n_out, n_in)
        b: (n_out,)
    """
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    xv, Wv = x.value, W.value
    if Wv.ndim != 2 or xv.shape[-1:] != Wv.shape[1:] or b.shape != Wv.shape[:1]:
        raise ShapeError(
            f"linear_relu: x {x.shape}, W {W.shape}, b {b.shape} do not agree"
        )
    z = xv @ Wv.T + b.value
    active = z > 0
    n_out, n_in = Wv.shape

    def backward(g: np.ndarray):
        gz = g * active
        flat_gz = gz.reshape(-1, n_out)
        return (
            gz @ Wv,
            flat_gz.T @ xv.reshape(-1, n_in),
            flat_gz.sum(axis=0),
        )

    return _emit(np.where(active, z, 0.0), (x, W, b), backward)


def conv_context(
    doc: ArrayLike,
    kernel: ArrayLike,
    bias: ArrayLike,
    pad_positions: Optional[np.ndarray] = None,
) -> Tensor:
    """
    Per-word contextual features of an embedded document.

    Row j is ReLU(sum_k K[:, k, :] . e_{j-eps+k} + b) over a width-c window
    zero-padded by eps = (c-1)/2 on both sides. Windows made only of padding
    (zero-padding or PAD tokens flagged in ``pad_positions``) give zero rows.
    A leading batch axis convolves equally long documents independently.

    Args:
        doc: (l, d) or (n, l, d) embedded tokens
        kernel: (n_f, c, d) filter bank, c odd
        bias: (n_f,)
        pad_positions: (l,) or (n, l) booleans marking PAD tokens

    Returns:
        (l, n_f) or (n, l, n_f) features
    """
    doc, kernel, bias = as_tensor(doc), as_tensor(kernel), as_tensor(bias)
    xv, Kv = doc.value, kernel.value
    if xv.ndim not in (2, 3) or Kv.ndim != 3 or xv.shape[-1] != Kv.shape[2]:
        raise ShapeError(
            f"conv_context: document {doc.shape} and kernel {kernel.shape} disagree"
        )
    n_f, c, _ = Kv.shape
    if c % 2 == 0:
        raise ShapeError(f"conv_context: kernel width {c} must be odd")
    if bias.shape != (n_f,):
        raise ShapeError(f"conv_context: bias {bias.shape} for {n_f} filters")

    batched = xv.ndim == 3
    x3 = xv if batched else xv[None]
    n, l = x3.shape[:2]
    if l == 0:
        return as_tensor(np.zeros(xv.shape[:-1] + (n_f,)))

    eps = (c - 1) // 2
    padded = np.pad(x3, ((0, 0), (eps, eps), (0, 0)))
    windows = sliding_window_view(padded, c, axis=1)  # (n, l, d, c)

    if pad_positions is None:
        flags = np.zeros((n, l), dtype=bool)
    else:
        flags = np.asarray(pad_positions, dtype=bool).reshape(n, l)
    padded_flags = np.pad(flags, ((0, 0), (eps, eps)), constant_values=True)
    keep = ~sliding_window_view(padded_flags, c, axis=1).all(axis=-1)

    z = np.einsum("njdk,fkd->njf", windows, Kv) + bias.value
    active = (z > 0) & keep[..., None]

    def backward(g: np.ndarray):
        gz = (g if batched else g[None]) * active
        d_kernel = np.einsum("njf,njdk->fkd", gz, windows)
        d_windows = np.einsum("njf,fkd->njkd", gz, Kv)
        d_padded = np.zeros_like(padded)
        for k in range(c):
            d_padded[:, k : k + l] += d_windows[:, :, k, :]
        d_doc = d_padded[:, eps : eps + l]
        return (d_doc if batched else d_doc[0]), d_kernel, gz.sum(axis=(0, 1))

    value = np.where(active, z, 0.0)
    return _emit(value if batched else value[0], (doc, kernel, bias), backward)


def pairwise_product(M: ArrayLike, V: ArrayLike) -> Tensor:
    """
    out[x, y, :] = M[:, x] * V[:, y] for indicator matrices M (f, P), V (f, R)
    """
    M, V = as_tensor(M), as_tensor(V)
    Mv, Vv = M.value, V.value
    if Mv.ndim != 2 or Vv.ndim != 2 or Mv.shape[0] != Vv.shape[0]:
        raise ShapeError(f"pairwise_product: {M.shape} and {V.shape} disagree")

    def backward(g: np.ndarray):
        return (
            np.einsum("xyf,fy->fx", g, Vv),
            np.einsum("xyf,fx->fy", g, Mv),
        )

    return _emit(Mv.T[:, None, :] * Vv.T[None, :, :], (M, V), backward)


def square_sum(a: ArrayLike) -> Tensor:
    """Squared L2 norm"""
    a = as_tensor(a)
    av = a.value
    return _emit(np.asarray(np.sum(av * av)), (a,), lambda g: (2.0 * float(g) * av,))


def abs_sum(a: ArrayLike) -> Tensor:
    """L1 norm with subgradient sign(a), sign(0) = 0"""
    a = as_tensor(a)
    av = a.value
    return _emit(
        np.asarray(np.sum(np.abs(av))), (a,), lambda g: (float(g) * np.sign(av),)
    )


def dropout(a: ArrayLike, rate: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when rate is 0 or no generator is given"""
    a = as_tensor(a)
    if rng is None or rate <= 0.0:
        return a
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)
    return elementwise_product(a, mask)
