"""Compensated (Neumaier) accumulation helpers.

Prefix sums are stored as an unevaluated pair ``hi + lo``: ``hi`` is the
running floating-point sum and ``lo`` collects the rounding error of every
addition, recovered exactly by the two-sum error-free transform.  The pair
carries roughly twice the working precision, so ``x*S0 - S1`` style
differences keep their digits even at x ~ 1e7.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np
from numba import njit


@njit(cache=True)
def _neumaier_cumsum(values):
    n = values.shape[0]
    hi = np.empty(n)
    lo = np.empty(n)
    s = 0.0
    comp = 0.0
    for i in range(n):
        v = values[i]
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        hi[i] = s
        lo[i] = comp
    return hi, lo


def compensated_cumsum(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Running sums of ``values`` as (hi, lo) arrays with hi + lo ~ exact."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    return _neumaier_cumsum(values)


def as_extended(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """Collapse a (hi, lo) pair into x87 extended precision."""
    return hi.astype(np.longdouble) + lo.astype(np.longdouble)


def block_sum(blocks: Iterable[float]) -> float:
    """Sum per-block partials in the given (fixed) order, correctly rounded."""
    return math.fsum(blocks)


def array_sum(values: np.ndarray) -> float:
    # fsum is exactly rounded, hence independent of summation order.
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())
