"""Central finite differences used to certify analytic gradients"""

from __future__ import annotations

import math
from typing import Callable, Dict, Mapping

import numpy as np

from ..lib.core.errors import OracleError
from ..schemas.reports import GradCheckReport

DEFAULT_STEP = 1e-4
DEFAULT_RTOL = 1e-4
DEFAULT_ATOL = 1e-7


def finite_diff_grad(
    f: Callable[[Dict[str, np.ndarray]], float],
    params: Dict[str, np.ndarray],
    h: float = DEFAULT_STEP,
) -> Dict[str, np.ndarray]:
    """
    Numeric gradient of a scalar function by central differences.

    Each coordinate is perturbed in place by +h and -h and restored
    afterwards, so ``params`` is unchanged on return.

    Args:
        f: Scalar objective evaluated on the parameter mapping
        params: Named float64 arrays
        h: Finite-difference step

    Returns:
        (f(x+h) - f(x-h)) / 2h for every coordinate
    """
    grads: Dict[str, np.ndarray] = {}
    for name, array in params.items():
        grad = np.zeros_like(array)
        for index in np.ndindex(array.shape):
            original = array[index]
            try:
                array[index] = original + h
                upper = f(params)
                array[index] = original - h
                lower = f(params)
            finally:
                array[index] = original
            if not (math.isfinite(upper) and math.isfinite(lower)):
                raise OracleError(name, tuple(int(i) for i in index))
            grad[index] = (upper - lower) / (2.0 * h)
        grads[name] = grad
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(|a|, |n|, 1e-8), elementwise"""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def compare_gradients(
    analytic: Mapping[str, np.ndarray],
    numeric: Mapping[str, np.ndarray],
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GradCheckReport:
    """
    Summarise analytic versus numeric gradients.

    A coordinate passes when its relative error is below ``rtol`` or its
    absolute error is below ``atol``.
    """
    worst = (0.0, "", (0,))
    checked = (0.0, "", (0,))
    max_abs = 0.0
    n_coords = 0
    passed = True
    per_parameter: Dict[str, float] = {}

    for name, num in numeric.items():
        ana = analytic[name]
        rel = relative_error(ana, num)
        abs_err = np.abs(ana - num)
        n_coords += rel.size
        if rel.size == 0:
            per_parameter[name] = 0.0
            continue
        per_parameter[name] = float(rel.max())
        max_abs = max(max_abs, float(abs_err.max()))
        failing = (rel >= rtol) & (abs_err >= atol)
        if failing.any():
            passed = False
        idx = np.unravel_index(int(rel.argmax()), rel.shape)
        if rel[idx] > worst[0]:
            worst = (float(rel[idx]), name, tuple(int(i) for i in idx))
        # coordinates under atol are exempt from the relative bound
        bounded = np.where(abs_err >= atol, rel, 0.0)
        idx = np.unravel_index(int(bounded.argmax()), bounded.shape)
        if bounded[idx] > checked[0]:
            checked = (float(bounded[idx]), name, tuple(int(i) for i in idx))

    location = checked if checked[1] else worst
    return GradCheckReport(
        max_relative_error=worst[0],
        max_absolute_error=max_abs,
        max_checked_relative_error=checked[0],
        worst_parameter=location[1],
        worst_index=list(location[2]),
        n_coordinates=n_coords,
        passed=passed,
        per_parameter=per_parameter,
    )
