"""Power moments of Delta_1 and of the pieces R_1, R_2 of its truncated
expansion, plus the oscillatory-integral sanity bound.

Between consecutive integers Delta_1 is an exact quadratic, so Delta_1^k is a
polynomial of degree 2k there and a (k+1)-point Gauss-Legendre rule on every
unit interval integrates it with no discretization error.  R_1(x; y) is
smooth on scales much longer than 1 and is evaluated on Chebyshev panels,
then interpolated to the same unit-interval nodes.

Intervals are processed in fixed blocks of ``BLOCK`` unit intervals; each
block is reduced with an exactly rounded sum and the block partials are
summed in block order, so results do not depend on the thread count.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev, legendre
from scipy import integrate

from .coeffs import CoeffTable
from .constants import theorem_coefficient, theorem_exponent, theorem_prediction
from .errterm import CalibrationConstants, delta1_at_integers, voronoi_R1

__all__ = [
    "MomentReport",
    "integrate_delta1_power",
    "verify_theorem",
    "second_moment",
    "second_moment_prediction",
    "moment_R1",
    "moment_R2",
    "oscillatory_bound",
    "lemma_baseline",
]

BLOCK = 1 << 15
CHEB_NODES = 16


@dataclass
class MomentReport:
    k: int
    T1: float
    T2: float
    integral: float
    prediction: float = math.nan
    ratio: float = math.nan
    abs_integral: float = math.nan
    y: float | None = None
    nodes: int = 0
    seconds: float = 0.0
    kind: str = "delta1"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.prediction and math.isfinite(self.prediction) and math.isnan(self.ratio):
            self.ratio = self.integral / self.prediction


@lru_cache(maxsize=None)
def _gauss(g: int) -> tuple[np.ndarray, np.ndarray]:
    # Nodes mapped to [0, 1].  The largest weight absorbs the rounding
    # residual so the weights sum to 1 within half an ulp; a constant
    # integrand over whole unit intervals then integrates exactly.
    t, w = legendre.leggauss(g)
    w = w / 2
    j = int(np.argmax(w))
    w[j] -= float(sum(map(Fraction, w.tolist())) - 1)
    return (t + 1) / 2, w


class _R1Interpolant:
    """R_1(.; y) on [T1, T2], either evaluated directly or interpolated from
    Chebyshev panels short enough to hold a quarter cycle of its fastest
    cosine."""

    def __init__(self, ct: CoeffTable, T1: float, T2: float, y: float):
        self.ct, self.y = ct, y
        ny = int(math.floor(y))
        self.ny = ny
        self.width = 0
        if ny < 1:
            return
        fastest = ny**0.25 * T1**-0.75  # cycles per unit length
        width = int(min(4096, 0.25 / fastest))
        if ny <= 16 or width < 8:
            return
        self.width = width
        self.base = math.floor(T1)
        n_panels = int(math.ceil((T2 - self.base) / width))
        cheb_t = np.cos(np.pi * (np.arange(CHEB_NODES) + 0.5) / CHEB_NODES)
        left = self.base + width * np.arange(n_panels, dtype=np.float64)
        xs = left[:, None] + (cheb_t[None, :] + 1) * (width / 2)
        vals = voronoi_R1(ct, xs.ravel(), y).reshape(n_panels, CHEB_NODES)
        inv = np.linalg.inv(chebyshev.chebvander(cheb_t, CHEB_NODES - 1))
        self.coef = vals @ inv.T
        self.panel_evals = xs.size

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.ny < 1:
            return np.zeros_like(x)
        if not self.width:
            return voronoi_R1(self.ct, x.ravel(), self.y).reshape(x.shape)
        flat = x.ravel()
        p = np.minimum(((flat - self.base) // self.width).astype(np.int64),
                       self.coef.shape[0] - 1)
        tau = 2 * (flat - (self.base + p * self.width)) / self.width - 1
        V = chebyshev.chebvander(tau, CHEB_NODES - 1)
        return np.einsum("ij,ij->i", V, self.coef[p]).reshape(x.shape)


def _check(ct: CoeffTable, T1: float, T2: float) -> None:
    if not (0 <= T1 < T2):
        raise ValueError(f"need 0 <= T1 < T2, got [{T1}, {T2}]")
    if T2 > ct.N:
        raise ValueError(f"range [{T1}, {T2}] exceeds coefficient table N={ct.N}")


def _integrate(ct, cal, T1, T2, g, integrand, threads=1, needs_delta=True, r1=None):
    """Sum over unit intervals of Gauss sums of integrand(x, Delta_1(x), R_1(x)).

    ``integrand`` returns a tuple of arrays; the result is the tuple of
    integrals.
    """
    t, w = _gauss(g)
    j0, j1 = math.floor(T1), math.ceil(T2)
    starts = list(range(j0, j1, BLOCK))

    def block(start):
        js = np.arange(start, min(start + BLOCK, j1), dtype=np.int64)
        a = np.maximum(js, T1)
        b = np.minimum(js + 1, T2)
        h = b - a
        x = a[:, None] + h[:, None] * t[None, :]
        s = x - js[:, None]
        if needs_delta:
            value, slope = delta1_at_integers(ct, cal, js)
            d = value[:, None] + (slope[:, None] - (cal.A / 2) * s) * s
        else:
            d = None
        r = r1(x) if r1 is not None else None
        wts = h[:, None] * w[None, :]
        return tuple(math.fsum((f * wts).ravel().tolist()) for f in integrand(x, d, r))

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(block, starts))
    else:
        partials = [block(s) for s in starts]
    n_out = len(partials[0]) if partials else 0
    return tuple(math.fsum(p[i] for p in partials) for i in range(n_out)), (j1 - j0) * g


def integrate_delta1_power(ct: CoeffTable, cal: CalibrationConstants, k: int, T1: float,
                           T2: float, threads: int = 1, nodes: int | None = None,
                           integrand=None) -> MomentReport:
    """Exact-by-construction integral of Delta_1^k over [T1, T2].

    ``integrand`` (test hook) replaces Delta_1 -> Delta_1^k by an arbitrary
    function of (x, Delta_1(x)).
    """
    if not 1 <= k <= 6:
        raise ValueError(f"k must be in 1..6, got {k}")
    _check(ct, T1, T2)
    # k+1 nodes are already exact for degree 2k; one more keeps the report
    # invariant nodes >= ceil((2k+1)/2) + 1.
    g = nodes or k + 2
    if g < k + 1:
        raise ValueError(f"{g} Gauss nodes cannot integrate degree {2 * k} exactly")
    t0 = time.perf_counter()
    if integrand is None:
        def f(x, d, r):
            dk = d**k
            return dk, np.abs(dk)
    else:
        def f(x, d, r):
            v = integrand(x, d)
            return v, np.abs(v)
    (val, absval), n = _integrate(ct, cal, T1, T2, g, f, threads)
    return MomentReport(k=k, T1=T1, T2=T2, integral=val, abs_integral=absval, nodes=g,
                        seconds=time.perf_counter() - t0, kind="delta1",
                        extra={"evaluations": n})


def verify_theorem(k: int, ct: CoeffTable, cal: CalibrationConstants, B_k: float, T1: float,
                   T2: float, threads: int = 1) -> MomentReport:
    """Compare the computed moment with the main term

        B_k / ((2 pi)^{2k} 2^{k-1}) * int_{T1}^{T2} x^{9k/8} dx.

    The [1, T]-normalized coefficient B_k/((8+9k) 2^{3k-4} pi^{2k}) is
    reported alongside as ``extra['coefficient_1T']`` together with
    ``extra['prediction_T1_exp']`` = coefficient * T1^{1+9k/8}, the literal
    reading of the [T, 2T] statement, which omits the factor
    (2^{1+9k/8} - 1).
    """
    if k not in (3, 4, 5):
        raise ValueError(f"k must be 3, 4 or 5, got {k}")
    rep = integrate_delta1_power(ct, cal, k, T1, T2, threads=threads)
    coeff = theorem_coefficient(k, B_k)
    rep.kind = "theorem"
    rep.extra.update(B_k=B_k, coefficient_1T=coeff,
                     prediction_T1_exp=coeff * T1 ** theorem_exponent(k))
    rep.prediction = theorem_prediction(k, B_k, T1, T2)
    if B_k > 0:
        rep.ratio = rep.integral / rep.prediction
    else:
        rep.ratio = math.nan
        rep.extra["refused"] = "B_k <= 0: ratio not formed"
    return rep


def second_moment_prediction(C2: float, T1: float, T2: float) -> float:
    """(2/13) (2 pi)^{-4} C2 (T2^{13/4} - T1^{13/4})."""
    return 2 / 13 * (2 * math.pi) ** -4 * C2 * (T2**3.25 - T1**3.25)


def second_moment(ct: CoeffTable, cal: CalibrationConstants, T: float, C2: float,
                  threads: int = 1) -> MomentReport:
    """int_1^T Delta_1^2 against (2/13)(2 pi)^{-4} C2 T^{13/4}."""
    rep = integrate_delta1_power(ct, cal, 2, 1.0, T, threads=threads)
    rep.kind = "second"
    rep.prediction = 2 / 13 * (2 * math.pi) ** -4 * C2 * T**3.25
    rep.ratio = rep.integral / rep.prediction
    rep.extra["C2"] = C2
    return rep


def lemma_baseline(kind: str, p: int, T: float, y: float) -> tuple[float, bool]:
    """Scaling baseline T^a y^b of the L^p bounds and whether (T, y) lies in
    the regime where the bound is stated."""
    if kind == "R1":
        if p not in (2, 4, 6):
            raise ValueError(f"R1 moments are stated for p = 2, 4, 6, got {p}")
        return T ** (1 + 9 * (p // 2) / 4), y <= T**0.5
    if kind == "R2":
        exps = {2: (13 / 4, -3 / 4), 3: (35 / 8, -9 / 8), 4: (11 / 2, -3 / 2),
                5: (53 / 8, -3 / 8)}
        if p not in exps:
            raise ValueError(f"R2 moments are stated for p = 2..5, got {p}")
        a, b = exps[p]
        regime = y <= (T ** (1 / 3) if p == 2 else T ** (1 / 12))
        return T**a * max(y, 1.0) ** b, regime
    raise ValueError(f"unknown kind {kind!r}")


def moment_R1(ct: CoeffTable, p: int, T: float, y: float, threads: int = 1) -> MomentReport:
    """int_T^{2T} |R_1(x; y)|^p dx with the matching scaling baseline."""
    _check(ct, T, 2 * T)
    t0 = time.perf_counter()
    r1 = _R1Interpolant(ct, T, 2 * T, y)
    g = max(p + 2, 4)

    def f(x, d, r):
        v = np.abs(r) ** p
        return (v,)

    (val,), n = _integrate(ct, None, T, 2 * T, g, f, threads, needs_delta=False, r1=r1)
    base, regime = lemma_baseline("R1", p, T, y)
    return MomentReport(k=p, T1=T, T2=2 * T, integral=val, abs_integral=val, y=y,
                        prediction=base, ratio=val / base, nodes=g, kind="R1",
                        seconds=time.perf_counter() - t0,
                        extra={"in_regime": regime, "panel_width": r1.width})


def moment_R2(ct: CoeffTable, cal: CalibrationConstants, p: int, T: float, y: float,
              threads: int = 1, signed: bool = False) -> MomentReport:
    """int_T^{2T} |R_2(x; y)|^p dx (``signed`` gives int R_2^p instead).

    For y < 1, R_2 = Delta_1 and this reduces to integrate_delta1_power.
    """
    _check(ct, T, 2 * T)
    t0 = time.perf_counter()
    r1 = _R1Interpolant(ct, T, 2 * T, y)
    g = max(p + 2, 4) if r1.ny >= 1 else p + 2

    def f(x, d, r):
        rem = d - r
        v = rem**p
        return (v if signed else np.abs(v), np.abs(v))

    (val, absval), n = _integrate(ct, cal, T, 2 * T, g, f, threads, r1=r1)
    base, regime = lemma_baseline("R2", p, T, y) if p in (2, 3, 4, 5) else (math.nan, False)
    return MomentReport(k=p, T1=T, T2=2 * T, integral=val, abs_integral=absval, y=y,
                        prediction=base, ratio=val / base if base == base else math.nan,
                        nodes=g, kind="R2", seconds=time.perf_counter() - t0,
                        extra={"in_regime": regime, "panel_width": r1.width})


def _poly_exp_antiderivative(n: int, omega: float, u: float) -> complex:
    # d/du [e^{i w u} sum_j (-1)^j n!/(n-j)! u^{n-j} / (i w)^{j+1}] = u^n e^{i w u}
    iw = 1j * omega
    total = 0j
    fall = 1.0
    for j in range(n + 1):
        total += (-1) ** j * fall * u ** (n - j) / iw ** (j + 1)
        fall *= n - j
    return np.exp(iw * u) * total


def oscillatory_bound(alpha: float, beta: float, T: float, g: str = "cos"):
    """int_T^{2T} x^alpha g(2 pi beta x^{1/4}) dx against T^{alpha+3/4}/|beta|.

    With x = u^4 the integral becomes int 4 u^{4 alpha + 3} g(2 pi beta u) du,
    done in closed form by repeated integration by parts when 4 alpha + 3 is
    a nonnegative integer and by QAWO adaptive quadrature otherwise.
    Returns (integral, bound, ratio); for g='exp' the integral is complex.
    """
    if beta == 0:
        raise ValueError("beta must be nonzero")
    if g not in ("cos", "sin", "exp"):
        raise ValueError(f"g must be cos, sin or exp, got {g!r}")
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    omega = 2 * math.pi * beta
    u1, u2 = T**0.25, (2 * T) ** 0.25
    power = 4 * alpha + 3
    if power >= 0 and float(power).is_integer():
        n = int(power)
        z = 4 * (_poly_exp_antiderivative(n, omega, u2) - _poly_exp_antiderivative(n, omega, u1))
    else:
        f = lambda u: 4 * u**power  # noqa: E731
        re = integrate.quad(f, u1, u2, weight="cos", wvar=omega, limit=500)[0]
        im = integrate.quad(f, u1, u2, weight="sin", wvar=omega, limit=500)[0]
        z = complex(re, im)
    value = {"cos": z.real, "sin": z.imag, "exp": z}[g]
    bound = T ** (alpha + 0.75) / abs(beta)
    return value, bound, abs(value) / bound
