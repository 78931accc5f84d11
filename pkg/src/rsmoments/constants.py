"""Diophantine series constants s_{k;l}, B_k and the main-term coefficients.

    s_{k;l} = sum over n_1^{1/4}+...+n_l^{1/4} = n_{l+1}^{1/4}+...+n_k^{1/4}
              of prod c_{n_j} / prod n_j^{7/8}

Solutions are enumerated by kernel class.  Writing n_j = q_j^4 m_j, a tuple
solves the equation exactly when the positions sharing a kernel m form
groups that each contain both sides and balance their multipliers
(sum of left q = sum of right q).  For one group of a left and b right
positions the per-kernel weight is

    g_{a,b}(m) = sum_s [z^s] P_m(z)^a [z^s] P_m(z)^b,
    P_m(z) = sum_{q^4 m <= N} w(q^4 m) z^q,   w(n) = c_n n^{-7/8},

and groups of one set partition must sit on distinct kernels, which is
handled by Moebius inversion on the lattice of set partitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .coeffs import CoeffTable
from .radicals import kernel_table

__all__ = [
    "SeriesValue",
    "TheoremConstants",
    "DELTA_K",
    "beta",
    "phase_cos",
    "s_kl",
    "B_k",
    "second_moment_constant",
    "theorem_exponent",
    "theorem_coefficient",
    "theorem_prediction",
    "theorem_constants",
    "stated_denominator",
    "solution_tuples",
]

DELTA_K = {3: Fraction(3, 62), 4: Fraction(3, 256), 5: Fraction(1, 680)}

_HALF_SQRT2 = math.sqrt(0.5)
# cos(pi j / 4) for j mod 8, exactly representable up to the sqrt(2)/2 rounding.
_COS_EIGHTH = (1.0, _HALF_SQRT2, 0.0, -_HALF_SQRT2, -1.0, -_HALF_SQRT2, 0.0, _HALF_SQRT2)


@dataclass(frozen=True)
class SeriesValue:
    value: float
    N: int
    tail_estimate: float
    term_count: int

    def __post_init__(self):
        if not self.tail_estimate >= 0:
            raise ValueError(f"tail estimate must be >= 0, got {self.tail_estimate}")
        if self.term_count < 0:
            raise ValueError("term_count must be >= 0")


def beta(i) -> int:
    """1 + (-1)^{i_1} + ... + (-1)^{i_{k-1}}."""
    return 1 + sum(-1 if v else 1 for v in i)


def phase_cos(k: int, l: int) -> float:
    """cos(pi (k - 2l) / 4), i.e. cos(-pi beta / 4) for a sign vector with l plus signs."""
    return _COS_EIGHTH[(k - 2 * l) % 8]


# --- set partitions ------------------------------------------------------

def _set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for j in range(len(part)):
            yield part[:j] + [[first] + part[j]] + part[j + 1 :]
        yield [[first]] + part


def _balanced_partitions(k: int, l: int):
    """Set partitions of positions 0..k-1 whose blocks all meet both sides,
    each block returned as its (left count, right count)."""
    out = []
    for part in _set_partitions(range(k)):
        shape = []
        for block in part:
            a = sum(1 for p in block if p < l)
            b = len(block) - a
            if a == 0 or b == 0:
                break
            shape.append((a, b))
        else:
            out.append((part, shape))
    return out


def _moebius(groups_per_block) -> int:
    mu = 1
    for r in groups_per_block:
        mu *= (-1) ** (r - 1) * math.factorial(r - 1)
    return mu


# --- per-kernel weights --------------------------------------------------

def _bconv(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    out = np.zeros((X.shape[0], X.shape[1] + Y.shape[1] - 1))
    for j in range(Y.shape[1]):
        if np.any(Y[:, j]):
            out[:, j : j + X.shape[1]] += X * Y[:, j : j + 1]
    return out


class _KernelWeights:
    """g_{a,b}(m) for every fourth-power-free m <= N, for weighted and
    counting (w = 1 on n <= N) variants."""

    def __init__(self, w: np.ndarray, N: int, shapes):
        q_of, m_of = kernel_table(N)
        kernels = np.flatnonzero((q_of == 1) & (m_of > 0))
        Qm = np.floor((N / kernels) ** 0.25).astype(np.int64)
        Qm[(Qm + 1) ** 4 * kernels <= N] += 1
        Qm[Qm**4 * kernels > N] -= 1
        self.kernels = kernels
        self.max_power = max(max(a, b) for a, b in shapes)
        self.shapes = sorted(set(shapes))
        self.g = {s: np.zeros(kernels.size) for s in self.shapes}
        self.count = {s: np.zeros(kernels.size) for s in self.shapes}
        for Q in np.unique(Qm):
            sel = np.flatnonzero(Qm == Q)
            qs = np.arange(1, Q + 1)
            n_idx = kernels[sel][:, None] * qs[None, :] ** 4
            P = np.zeros((sel.size, Q + 1))
            P[:, 1:] = w[n_idx]
            C = np.zeros((sel.size, Q + 1))
            C[:, 1:] = 1.0
            for target, base in ((self.g, P), (self.count, C)):
                powers = {1: base}
                for p in range(2, self.max_power + 1):
                    powers[p] = _bconv(powers[p - 1], base)
                for a, b in self.shapes:
                    Pa, Pb = powers[a], powers[b]
                    L = min(Pa.shape[1], Pb.shape[1])
                    target[(a, b)][sel] = np.einsum("ij,ij->i", Pa[:, :L], Pb[:, :L])


def _fsum(arr: np.ndarray) -> float:
    return math.fsum(arr.tolist())


def _series(kw: _KernelWeights, k: int, l: int, which: str) -> float:
    table = kw.g if which == "g" else kw.count
    total = []
    for part, shape in _balanced_partitions(k, l):
        r = len(shape)
        for coarse in _set_partitions(range(r)):
            mu = _moebius([len(b) for b in coarse])
            prod = 1.0
            for block in coarse:
                per_kernel = np.ones(kw.kernels.size)
                for gi in block:
                    per_kernel = per_kernel * table[shape[gi]]
                prod *= _fsum(per_kernel)
            total.append(mu * prod)
    return math.fsum(total)


def _shapes(k: int, l: int):
    return [s for _, shape in _balanced_partitions(k, l) for s in shape]


def _s_kl_raw(k: int, l: int, N: int, w: np.ndarray) -> tuple[float, int]:
    shapes = _shapes(k, l)
    if N < 1 or not shapes:
        return 0.0, 0
    kw = _KernelWeights(w, N, shapes)
    return _series(kw, k, l, "g"), int(round(_series(kw, k, l, "count")))


def _check_kl(k: int, l: int) -> None:
    if not 2 <= k <= 6:
        raise ValueError(f"k must be in 2..6, got {k}")
    if not 1 <= l <= k - 1:
        raise ValueError(f"l must be in 1..{k - 1}, got {l}")


def _dyadic_tail(values) -> float:
    s_n, s_half, s_quarter = values
    d1, d2 = s_n - s_half, s_half - s_quarter
    if d1 <= 0:
        return 0.0
    if d2 > d1:
        r = d1 / d2
        return d1 * r / (1 - r)
    return math.inf


def s_kl(k: int, l: int, N: int, ct: CoeffTable, tail: bool = True) -> SeriesValue:
    """Truncated s_{k;l}: every n_j <= N.

    ``tail_estimate`` combines a geometric extrapolation of the increments
    s(N) - s(N/2), s(N/2) - s(N/4) with, for the balanced k=4, l=2 case, the
    exact diagonal-family bound 2 (2 S t + t^2) where S = sum w(n)^2 and t
    bounds its tail.  It is reported, never added to ``value``.
    """
    _check_kl(k, l)
    if N > ct.N:
        raise ValueError(f"truncation N={N} exceeds coefficient table N={ct.N}")
    w = ct.weights()
    value, count = _s_kl_raw(k, l, N, w)
    tail_est = 0.0
    if tail and N >= 4:
        tail_est = _dyadic_tail([value, _s_kl_raw(k, l, N // 2, w)[0],
                                 _s_kl_raw(k, l, N // 4, w)[0]])
        if k == 4 and l == 2:
            sm = second_moment_constant(N, ct)
            t = sm.tail_estimate
            tail_est = max(tail_est, 2 * (2 * sm.value * t + t * t))
    return SeriesValue(value=value, N=N, tail_estimate=tail_est, term_count=count)


def B_k(k: int, N: int, ct: CoeffTable, parts: dict | None = None) -> SeriesValue:
    """B_k = sum_{l=1}^{k-1} C(k-1, l) s_{k;l} cos(pi (k - 2l)/4).

    s_{k;l} = s_{k;k-l}, so only l <= k/2 is enumerated.  ``parts``, if a
    dict, receives the individual s_{k;l} values.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    cache: dict[int, SeriesValue] = {}
    value, tail, count = [], 0.0, 0
    for l in range(1, k):
        key = min(l, k - l)
        if key not in cache:
            cache[key] = s_kl(k, key, N, ct)
        s = cache[key]
        if parts is not None:
            parts[l] = s
        wgt = math.comb(k - 1, l) * phase_cos(k, l)
        value.append(wgt * s.value)
        tail += abs(wgt) * s.tail_estimate
        count += s.term_count
    return SeriesValue(value=math.fsum(value), N=N, tail_estimate=tail, term_count=count)


def second_moment_constant(N: int, ct: CoeffTable, eps: float = 0.1) -> SeriesValue:
    """sum_{n<=N} c_n^2 n^{-7/4}; tail bounded by K int_N^inf t^{-7/4+eps} dt
    with K = max_{n<=N} c_n^2 n^{-eps} standing in for sup_{n>N}."""
    if N > ct.N:
        raise ValueError(f"truncation N={N} exceeds coefficient table N={ct.N}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    n = np.arange(1, N + 1, dtype=np.float64)
    c2 = ct.c[1 : N + 1] ** 2
    value = _fsum(c2 * n**-1.75)
    K = float(np.max(c2 * n**-eps))
    tail = K * N ** (eps - 0.75) / (0.75 - eps)
    return SeriesValue(value=value, N=N, tail_estimate=tail, term_count=N)


# --- main-term constants -------------------------------------------------

def theorem_exponent(k: int) -> float:
    return 1 + 9 * k / 8


def stated_denominator(k: int) -> int:
    """(8 + 9k) 2^{3k-4}: 1120, 11264, 108544 for k = 3, 4, 5."""
    return (8 + 9 * k) * 2 ** (3 * k - 4)


def theorem_coefficient(k: int, B: float) -> float:
    """B_k / ((8+9k) 2^{3k-4} pi^{2k}), the coefficient of T^{1+9k/8} for
    the integral over [0, T]."""
    return B / (stated_denominator(k) * math.pi ** (2 * k))


def theorem_prediction(k: int, B: float, T1: float, T2: float) -> float:
    """B_k/((2 pi)^{2k} 2^{k-1}) * int_{T1}^{T2} x^{9k/8} dx."""
    if not 0 < T1 < T2:
        raise ValueError(f"need 0 < T1 < T2, got [{T1}, {T2}]")
    e = theorem_exponent(k)
    return B / ((2 * math.pi) ** (2 * k) * 2 ** (k - 1)) * (T2**e - T1**e) / e


@dataclass(frozen=True)
class TheoremConstants:
    k: int
    B_k: float
    coefficient: float
    exponent: float
    delta_k: Fraction


def theorem_constants(k: int, B: float) -> TheoremConstants:
    if k not in DELTA_K:
        raise ValueError(f"k must be 3, 4 or 5, got {k}")
    return TheoremConstants(k=k, B_k=B, coefficient=theorem_coefficient(k, B),
                            exponent=theorem_exponent(k), delta_k=DELTA_K[k])


# --- explicit solution lists (small N) ------------------------------------

def solution_tuples(k: int, l: int, N: int) -> set[tuple[int, ...]]:
    """All ordered solutions with n_j <= N, generated kernel class by kernel
    class (for cross-checks; cost grows quickly with N)."""
    _check_kl(k, l)
    q_of, m_of = kernel_table(N)
    kernels = [int(m) for m in np.flatnonzero((q_of == 1) & (m_of > 0))]
    out = set()
    for part, shape in _balanced_partitions(k, l):
        per_group = []
        for block, (a, b) in zip(part, shape):
            left = [p for p in block if p < l]
            right = [p for p in block if p >= l]
            opts = []
            for m in kernels:
                Q = 1
                while (Q + 1) ** 4 * m <= N:
                    Q += 1
                for qs in product(range(1, Q + 1), repeat=len(block)):
                    assign = dict(zip(left + right, qs))
                    if sum(assign[p] for p in left) == sum(assign[p] for p in right):
                        opts.append((m, {p: q**4 * m for p, q in assign.items()}))
            per_group.append(opts)
        for combo in product(*per_group):
            ms = [m for m, _ in combo]
            if len(set(ms)) != len(ms):
                continue
            tup = {}
            for _, assign in combo:
                tup.update(assign)
            out.add(tuple(tup[p] for p in range(k)))
    return out
