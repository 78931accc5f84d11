"""Exact arithmetic on signed sums of fourth roots.

Fourth roots of distinct fourth-power-free positive integers are linearly
independent over Q, so a combination sum_j s_j n_j^{1/4} vanishes exactly
when, after writing n_j = q_j^4 m_j with m_j fourth-power-free, the signed
multipliers cancel within every kernel class m.  That makes the dichotomy
alpha = 0 / alpha != 0 decidable with integer arithmetic; floats are used
only to measure nonzero values, with 200-bit mpmath as a fallback near
zero or near a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
from numba import njit

__all__ = [
    "Radical",
    "SignedRadicalSum",
    "CountQuery",
    "BudgetExceeded",
    "DEFAULT_BUDGET",
    "kernel_decompose",
    "kernel_table",
    "alpha_is_zero",
    "alpha_zero_mask",
    "alpha_numeric",
    "signs_from_vector",
    "min_nonzero_alpha",
    "count_near_solutions",
    "count_rs",
    "near_count_bound",
    "rs_count_bound",
]

DEFAULT_BUDGET = 10**8
PRECISION_BITS = 200
# Float evaluations closer than this to zero or to a threshold are re-done
# at PRECISION_BITS.
_FLOAT_BAND = 1e-9


class BudgetExceeded(RuntimeError):
    def __init__(self, required: int, budget: int):
        self.required, self.budget = required, budget
        super().__init__(
            f"enumeration needs {required} tuples, above the budget of {budget}; "
            f"raise the budget to at least {required}"
        )



@dataclass(frozen=True)
class Radical:
    n: int
    q: int
    m: int

    def __post_init__(self):
        if self.q**4 * self.m != self.n:
            raise ValueError(f"{self.q}^4 * {self.m} != {self.n}")


def kernel_decompose(n: int) -> Radical:
    """n = q^4 m with m fourth-power-free."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    q, m = 1, n
    p = 2
    while p**4 <= m:
        p4 = p**4
        while m % p4 == 0:
            m //= p4
            q *= p
        p += 1 if p == 2 else 2
    return Radical(n=n, q=q, m=m)


def kernel_table(N: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays (q, m) over 0..N with n = q[n]^4 m[n] (index 0 unused)."""
    fpf = np.ones(N + 1, dtype=bool)
    fpf[0] = False
    p = 2
    while p**4 <= N:
        fpf[p**4 :: p**4] = False
        p += 1
    kernels = np.flatnonzero(fpf)
    q_of = np.zeros(N + 1, dtype=np.int64)
    m_of = np.zeros(N + 1, dtype=np.int64)
    q = 1
    while q**4 <= N:
        ms = kernels[kernels <= N // q**4]
        q_of[q**4 * ms] = q
        m_of[q**4 * ms] = ms
        q += 1
    return q_of, m_of


@dataclass
class SignedRadicalSum:
    """sum_m coeff[m] * m^{1/4}; zero coefficients are never stored."""

    terms: dict = field(default_factory=dict)

    def add(self, sign: int, n: int | Radical) -> "SignedRadicalSum":
        r = n if isinstance(n, Radical) else kernel_decompose(n)
        c = self.terms.get(r.m, 0) + sign * r.q
        if c:
            self.terms[r.m] = c
        else:
            self.terms.pop(r.m, None)
        return self

    def is_zero(self) -> bool:
        return not self.terms

    def value(self, bits: int = PRECISION_BITS) -> mpmath.mpf:
        with mpmath.workprec(bits):
            return mpmath.fsum(c * mpmath.root(m, 4) for m, c in sorted(self.terms.items()))


def signs_from_vector(i, k: int | None = None) -> tuple[int, ...]:
    """Sign vector (+1, (-1)^{i_1}, ..., (-1)^{i_{k-1}})."""
    i = tuple(int(v) for v in i)
    if any(v not in (0, 1) for v in i):
        raise ValueError(f"sign vector entries must be 0 or 1, got {i}")
    if k is not None and len(i) != k - 1:
        raise ValueError(f"need {k - 1} sign entries, got {len(i)}")
    return (1,) + tuple(-1 if v else 1 for v in i)


def alpha_is_zero(ns, i) -> bool:
    """Exact test of n_1^{1/4} + (-1)^{i_1} n_2^{1/4} + ... = 0."""
    ns = tuple(ns)
    if len(ns) < 2:
        raise ValueError("need k >= 2 terms")
    signs = signs_from_vector(i, len(ns))
    acc = SignedRadicalSum()
    for s, n in zip(signs, ns):
        acc.add(s, n)
    return acc.is_zero()


def alpha_numeric(ns, i, bits: int = PRECISION_BITS) -> mpmath.mpf:
    signs = signs_from_vector(i, len(tuple(ns)))
    with mpmath.workprec(bits):
        return mpmath.fsum(s * mpmath.root(n, 4) for s, n in zip(signs, ns))


def alpha_zero_mask(ns, i) -> np.ndarray:
    """Row-wise alpha_is_zero for an integer array of shape (rows, k)."""
    ns = np.ascontiguousarray(ns, dtype=np.int64)
    if ns.ndim != 2 or ns.shape[1] < 2:
        raise ValueError(f"need a (rows, k >= 2) array, got shape {ns.shape}")
    if ns.size and ns.min() < 1:
        raise ValueError("entries must be positive")
    signs = np.array(signs_from_vector(i, ns.shape[1]), dtype=np.int64)
    qarr, marr = kernel_table(int(ns.max()) if ns.size else 1)
    return _zero_rows(ns, signs, qarr, marr)


# --- enumeration kernels -------------------------------------------------

@njit(cache=True)
def _unravel(idx, lo, sizes, out):
    for j in range(sizes.shape[0] - 1, -1, -1):
        out[j] = lo[j] + idx % sizes[j]
        idx //= sizes[j]


@njit(cache=True)
def _exact_zero(tup, signs, qarr, marr):
    k = tup.shape[0]
    for a in range(k):
        ma = marr[tup[a]]
        total = 0
        for b in range(k):
            if marr[tup[b]] == ma:
                total += signs[b] * qarr[tup[b]]
        if total != 0:
            return False
    return True


@njit(cache=True)
def _zero_rows(ns, signs, qarr, marr):
    out = np.empty(ns.shape[0], dtype=np.bool_)
    for r in range(ns.shape[0]):
        out[r] = _exact_zero(ns[r], signs, qarr, marr)
    return out


@njit(cache=True)
def _scan_min(lo, sizes, signs, roots, qarr, marr, total, band):
    k = lo.shape[0]
    tup = np.empty(k, dtype=np.int64)
    best = np.inf
    best_idx = -1
    n_close = 0
    for idx in range(total):
        _unravel(idx, lo, sizes, tup)
        v = 0.0
        for j in range(k):
            v += signs[j] * roots[tup[j]]
        v = abs(v)
        if v < band:
            if _exact_zero(tup, signs, qarr, marr):
                continue
            n_close += 1
        if v < best:
            best = v
            best_idx = idx
    return best, best_idx, n_close


@njit(cache=True)
def _collect_close(lo, sizes, signs, roots, qarr, marr, total, band, cap):
    k = lo.shape[0]
    tup = np.empty(k, dtype=np.int64)
    out = np.empty(cap, dtype=np.int64)
    n = 0
    for idx in range(total):
        _unravel(idx, lo, sizes, tup)
        v = 0.0
        for j in range(k):
            v += signs[j] * roots[tup[j]]
        if abs(v) < band and not _exact_zero(tup, signs, qarr, marr):
            if n < cap:
                out[n] = idx
            n += 1
    return out[: min(n, cap)], n


@njit(cache=True)
def _scan_count(lo, sizes, signs, roots, qarr, marr, total, thr, band, cap):
    k = lo.shape[0]
    tup = np.empty(k, dtype=np.int64)
    amb = np.empty(cap, dtype=np.int64)
    n_amb = 0
    count = 0
    for idx in range(total):
        _unravel(idx, lo, sizes, tup)
        v = 0.0
        for j in range(k):
            v += signs[j] * roots[tup[j]]
        v = abs(v)
        if v < band and _exact_zero(tup, signs, qarr, marr):
            count += 1
        elif v < thr - band:
            count += 1
        elif v <= thr + band:
            if n_amb < cap:
                amb[n_amb] = idx
            n_amb += 1
    return count, amb[: min(n_amb, cap)], n_amb


def _prepare(ranges, signs):
    lo = np.array([r[0] for r in ranges], dtype=np.int64)
    hi = np.array([r[1] for r in ranges], dtype=np.int64)
    if np.any(lo < 1) or np.any(hi < lo):
        raise ValueError(f"invalid integer ranges {ranges}")
    sizes = hi - lo + 1
    total = math.prod(int(s) for s in sizes)
    top = int(hi.max())
    roots = np.arange(top + 1, dtype=np.float64) ** 0.25
    qarr, marr = kernel_table(top)
    return lo, sizes, total, np.array(signs, dtype=np.int64), roots, qarr, marr


def _tuple_at(idx: int, lo, sizes) -> tuple[int, ...]:
    out = []
    for j in range(len(sizes) - 1, -1, -1):
        out.append(int(lo[j]) + idx % int(sizes[j]))
        idx //= int(sizes[j])
    return tuple(reversed(out))


def min_nonzero_alpha(ranges, i, budget: int = DEFAULT_BUDGET):
    """min |alpha(n; i)| over n_j in the closed integer intervals ``ranges``
    with alpha != 0.  Returns (value, argmin tuple); (inf, None) if every
    tuple is an exact zero."""
    signs = signs_from_vector(i, len(ranges))
    lo, sizes, total, sg, roots, qarr, marr = _prepare(ranges, signs)
    if total > budget:
        raise BudgetExceeded(total, budget)
    best, best_idx, n_close = _scan_min(lo, sizes, sg, roots, qarr, marr, total, _FLOAT_BAND)
    if n_close:
        # Float cannot resolve these; settle the minimum at high precision.
        idxs, n = _collect_close(lo, sizes, sg, roots, qarr, marr, total, _FLOAT_BAND,
                                 n_close)
        cands = [_tuple_at(int(j), lo, sizes) for j in idxs]
        vals = [abs(alpha_numeric(t, i)) for t in cands]
        j = min(range(len(vals)), key=lambda r: vals[r])
        return float(vals[j]), cands[j]
    if best_idx < 0:
        return math.inf, None
    arg = _tuple_at(int(best_idx), lo, sizes)
    return float(abs(alpha_numeric(arg, i))), arg


@dataclass(frozen=True)
class CountQuery:
    """Count n_j in (N_j, 2 N_j] with |alpha(n; i)| < delta."""

    k: int
    N: tuple
    i: tuple
    delta: float

    def __post_init__(self):
        if self.k < 3:
            raise ValueError(f"k must be >= 3, got {self.k}")
        if len(self.N) != self.k or any(int(v) < 1 for v in self.N):
            raise ValueError(f"need {self.k} ranges N_j >= 1, got {self.N}")
        signs_from_vector(self.i, self.k)
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")

    @property
    def H(self) -> int:
        return max(int(v) for v in self.N)

    @property
    def ranges(self) -> list[tuple[int, int]]:
        return [(int(v) + 1, 2 * int(v)) for v in self.N]

    def describe(self) -> str:
        return (f"k={self.k};N={':'.join(str(v) for v in self.N)};"
                f"i={':'.join(str(v) for v in self.i)};delta={self.delta!r}")


def count_near_solutions(q: CountQuery, budget: int = DEFAULT_BUDGET) -> int:
    signs = signs_from_vector(q.i, q.k)
    lo, sizes, total, sg, roots, qarr, marr = _prepare(q.ranges, signs)
    if total > budget:
        raise BudgetExceeded(total, budget)
    band = _FLOAT_BAND * max(1.0, q.delta)
    count, amb, n_amb = _scan_count(lo, sizes, sg, roots, qarr, marr, total,
                                    float(q.delta), band, 1 << 16)
    if n_amb > amb.size:
        raise RuntimeError(f"{n_amb} tuples lie within {band:g} of delta; refusing to guess")
    thr = mpmath.mpf(q.delta)
    with mpmath.workprec(PRECISION_BITS):
        for j in amb:
            if abs(alpha_numeric(_tuple_at(int(j), lo, sizes), q.i)) < thr:
                count += 1
    return int(count)


@njit(cache=True)
def _rs_scan(vals, thr, band, cap):
    n = vals.shape[0]
    count = 0
    amb = np.empty((cap, 4), dtype=np.int64)
    n_amb = 0
    for a in range(n):
        for b in range(n):
            for c in range(n):
                for d in range(n):
                    if (a == c and b == d) or (a == d and b == c):
                        count += 1
                        continue
                    v = abs(vals[a] + vals[b] - vals[c] - vals[d])
                    if v < thr - band:
                        count += 1
                    elif v <= thr + band:
                        if n_amb < cap:
                            amb[n_amb, 0] = a
                            amb[n_amb, 1] = b
                            amb[n_amb, 2] = c
                            amb[n_amb, 3] = d
                        n_amb += 1
    return count, amb[: min(n_amb, cap)], n_amb


def count_rs(M: int, delta: float, c: float, budget: int = DEFAULT_BUDGET) -> int:
    """#{M < m_1..m_4 <= 2M : |m_1^c + m_2^c - m_3^c - m_4^c| <= delta M^c}."""
    if float(c).is_integer():
        raise ValueError(f"exponent c must be a non-integer real, got {c}")
    if c <= 0:
        raise ValueError(f"exponent c must be positive, got {c}")
    M = int(M)
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    total = M**4
    if total > budget:
        raise BudgetExceeded(total, budget)
    ms = np.arange(M + 1, 2 * M + 1, dtype=np.float64)
    vals = ms**c
    thr = delta * float(M) ** c
    band = _FLOAT_BAND * max(1.0, float(vals[-1]))
    count, amb, n_amb = _rs_scan(vals, thr, band, 1 << 16)
    if n_amb > amb.shape[0]:
        raise RuntimeError(f"{n_amb} tuples lie within {band:g} of the threshold")
    with mpmath.workprec(PRECISION_BITS):
        cc = mpmath.mpf(c)
        t = mpmath.mpf(delta) * mpmath.mpf(M) ** cc
        for a, b, c_, d in amb:
            m1, m2, m3, m4 = (M + 1 + int(v) for v in (a, b, c_, d))
            v = abs(mpmath.mpf(m1) ** cc + mpmath.mpf(m2) ** cc
                    - mpmath.mpf(m3) ** cc - mpmath.mpf(m4) ** cc)
            if v <= t:
                count += 1
    return int(count)


def near_count_bound(q: CountQuery) -> float:
    """(delta H^{-1/4} + H^{-1}) prod N_j, the shape of the counting bound."""
    H = q.H
    return (q.delta * H**-0.25 + 1.0 / H) * math.prod(float(v) for v in q.N)


def rs_count_bound(M: int, delta: float, eps: float = 0.01) -> float:
    return (M**2 + delta * M**4) * M**eps

