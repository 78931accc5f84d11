"""Riesz means, the error terms Delta and Delta_1, and the truncated
Voronoi-type expansion R_1(x; y) with its remainder R_2 = Delta_1 - R_1.

    D_rho(x) = (1/rho!) sum_{n<=x} (x - n)^rho c_n
             = A x^{rho+1}/(rho+1)! + Z0 x^rho/rho! + Delta_rho(x)

Every D_rho query is O(1): the binomial expansion of (x - n)^rho turns it
into a combination of the prefix sums S_j = sum n^j c_n, held as
compensated (hi, lo) pairs and combined in x87 extended precision.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .coeffs import CoeffTable

__all__ = [
    "CalibrationConstants",
    "CalibrationError",
    "ErrorSample",
    "riesz_mean",
    "calibrate",
    "calibrate_cross",
    "delta0",
    "delta1",
    "delta1_at_integers",
    "voronoi_R1",
    "remainder_R2",
    "sample",
    "read_sidecar",
    "write_sidecar",
]

FOUR_PI_SQ = 4.0 * math.pi**2


class CalibrationError(ValueError):
    pass


class ExpansionRegimeWarning(UserWarning):
    """y lies outside the regime 1 << y << x^2 of the truncated expansion."""


@dataclass(frozen=True)
class CalibrationConstants:
    A: float
    Z0: float
    method: str = "user-supplied"
    residual: float = 0.0
    rho: int | None = None
    samples: str = ""

    def __post_init__(self):
        if not self.A > 0:
            raise CalibrationError(f"mean coefficient A must be positive, got {self.A}")


@dataclass(frozen=True)
class ErrorSample:
    x: float
    D0: float
    D1: float
    delta0: float
    delta1: float
    y: float | None = None
    R1: float | None = None
    R2: float | None = None


def _check_range(ct: CoeffTable, x: np.ndarray) -> None:
    if x.size and (np.min(x) < 0 or np.max(x) > ct.N):
        raise ValueError(
            f"x outside table range [0, {ct.N}]: min {np.min(x)}, max {np.max(x)}"
        )


def riesz_mean(ct: CoeffTable, x, rho: int):
    """D_rho(x) for rho in 0..3 (scalar or array)."""
    if rho not in (0, 1, 2, 3):
        raise ValueError(f"rho must be 0..3, got {rho}")
    xa = np.asarray(x, dtype=np.float64)
    _check_range(ct, xa)
    n = np.floor(xa).astype(np.int64)
    xl = xa.astype(np.longdouble)
    total = np.zeros(xa.shape, dtype=np.longdouble)
    for j in range(rho + 1):
        total += math.comb(rho, j) * (-1) ** j * xl ** (rho - j) * ct.prefix(j, n)
    out = (total / math.factorial(rho)).astype(np.float64)
    return float(out) if np.ndim(x) == 0 else out


def _fit(ct: CoeffTable, rho: int, xs: np.ndarray) -> tuple[float, float, float]:
    D = np.asarray(riesz_mean(ct, xs, rho), dtype=np.float64)
    scale = xs ** (rho + 1)
    # Rows divided by x^{rho+1}: unknowns A, Z0 with columns 1/(rho+1)!, 1/(rho! x).
    M = np.column_stack([np.full_like(xs, 1.0 / math.factorial(rho + 1)),
                         1.0 / (math.factorial(rho) * xs)])
    (A, Z0), *_ = np.linalg.lstsq(M, D / scale, rcond=None)
    model = A * scale / math.factorial(rho + 1) + Z0 * xs**rho / math.factorial(rho)
    rms = math.sqrt(float(np.mean((D - model) ** 2)))
    return float(A), float(Z0), rms / float(xs.max()) ** (rho + 1)


def calibrate(ct: CoeffTable, rho: int = 3, samples=None) -> CalibrationConstants:
    """Least-squares fit of D_rho(x) to A x^{rho+1}/(rho+1)! + Z0 x^rho/rho!.

    The default sample set is 4096 equally spaced points on the top dyadic
    range (N/2, N] of the table; the oscillating remainder averages out.
    """
    if rho not in (2, 3):
        raise ValueError(f"calibration uses rho = 2 or 3, got {rho}")
    if samples is None:
        samples = np.linspace(ct.N / 2, ct.N, 4096)
    xs = np.asarray(samples, dtype=np.float64)
    if xs.size < 8:
        raise CalibrationError(f"need at least 8 samples, got {xs.size}")
    _check_range(ct, xs)
    if xs.min() <= 0 or xs.max() < 2 * xs.min():
        raise CalibrationError(
            "samples must span at least one dyadic range (max >= 2 min > 0)"
        )
    A, Z0, residual = _fit(ct, rho, xs)
    if not A > 0 or A * xs.max() / (rho + 1) < abs(Z0):
        raise CalibrationError(
            f"insufficient signal: fitted A={A:.6g} does not dominate Z0={Z0:.6g}"
        )
    desc = f"{xs.size} pts on [{xs.min():.17g}, {xs.max():.17g}]"
    return CalibrationConstants(A=A, Z0=Z0, method=f"fitted(rho={rho})", residual=residual,
                                rho=rho, samples=desc)


def calibrate_cross(ct: CoeffTable, samples=None, factor: float = 5.0):
    """Fit at rho=2 and rho=3 and require the two values of A to agree.

    The residuals are normalized by x^{rho+1}; converted to units of A they
    become (rho+1)! * residual.  The tolerance is ``factor`` times the
    larger of those.  Returns (rho3 constants, rho2 constants, |A2 - A3|, tol).
    """
    c2 = calibrate(ct, 2, samples)
    c3 = calibrate(ct, 3, samples)
    tol = factor * max(6 * c2.residual, 24 * c3.residual)
    gap = abs(c2.A - c3.A)
    if gap > tol:
        raise CalibrationError(
            f"rho=2 and rho=3 fits disagree: A2={c2.A!r}, A3={c3.A!r}, gap {gap:.3e} > {tol:.3e}"
        )
    return c3, c2, gap, tol


def delta0(ct: CoeffTable, cal: CalibrationConstants, x):
    """Delta(x) = sum_{n<=x} c_n - A x."""
    xa = np.asarray(x, dtype=np.float64)
    _check_range(ct, xa)
    out = (ct.prefix(0, np.floor(xa).astype(np.int64)) - np.longdouble(cal.A) * xa).astype(
        np.float64)
    return float(out) if np.ndim(x) == 0 else out


def delta1(ct: CoeffTable, cal: CalibrationConstants, x):
    """Delta_1(x) = D_1(x) - A x^2/2 - Z0 x."""
    xa = np.asarray(x, dtype=np.float64)
    _check_range(ct, xa)
    n = np.floor(xa).astype(np.int64)
    xl = xa.astype(np.longdouble)
    A = np.longdouble(cal.A)
    Z0 = np.longdouble(cal.Z0)
    val = xl * ct.prefix(0, n) - ct.prefix(1, n) - (A * xl / 2 + Z0) * xl
    out = val.astype(np.float64)
    return float(out) if np.ndim(x) == 0 else out


def delta1_at_integers(ct: CoeffTable, cal: CalibrationConstants, j: np.ndarray):
    """(Delta_1(j), Delta_1'(j+)) for integer j.

    On [j, j+1) Delta_1(j + t) = value + slope t - (A/2) t^2 exactly.
    """
    j = np.asarray(j, dtype=np.int64)
    jl = j.astype(np.longdouble)
    A = np.longdouble(cal.A)
    Z0 = np.longdouble(cal.Z0)
    S0 = ct.prefix(0, j)
    value = jl * S0 - ct.prefix(1, j) - (A * jl / 2 + Z0) * jl
    slope = S0 - A * jl - Z0
    return value.astype(np.float64), slope.astype(np.float64)


@njit(cache=True)
def _r1_kernel(x, w, ny):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        xi = x[i]
        s = 0.0
        for n in range(1, ny + 1):
            if w[n] == 0.0:
                continue
            four_u = 4.0 * (n * xi) ** 0.25
            frac = four_u - math.floor(four_u)
            s += w[n] * math.cos(2.0 * math.pi * frac - 0.25 * math.pi)
        out[i] = xi**1.125 * s / (4.0 * math.pi**2)
    return out


def voronoi_R1(ct: CoeffTable, x, y):
    """R_1(x; y) = x^{9/8}/(4 pi^2) sum_{n<=y} c_n n^{-7/8} cos(8 pi (n x)^{1/4} - pi/4).

    The phase is reduced as 2 pi frac(4 (n x)^{1/4}); for n x < 2^53 the
    product is exact and the reduced phase is accurate to ~1e-12 rad at the
    scales used here.
    """
    if y < 0:
        raise ValueError(f"y must be >= 0, got {y}")
    ny = int(math.floor(y))
    if ny > ct.N:
        raise ValueError(f"y={y} exceeds table size N={ct.N}")
    xa = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if ny >= 1 and xa.size and y > float(np.min(xa)) ** 2:
        warnings.warn(f"y={y} exceeds x^2: outside the truncated expansion's regime",
                      ExpansionRegimeWarning, stacklevel=2)
    if ny < 1:
        out = np.zeros_like(xa)
    else:
        out = _r1_kernel(np.ascontiguousarray(xa), ct.weights(), ny)
    return float(out[0]) if np.ndim(x) == 0 else out


def remainder_R2(ct: CoeffTable, cal: CalibrationConstants, x, y):
    r1 = voronoi_R1(ct, x, y)
    return delta1(ct, cal, x) - r1


def sample(ct: CoeffTable, cal: CalibrationConstants, xs, y=None) -> list[ErrorSample]:
    xs = np.asarray(xs, dtype=np.float64)
    D0 = riesz_mean(ct, xs, 0)
    D1 = riesz_mean(ct, xs, 1)
    d0 = delta0(ct, cal, xs)
    d1 = delta1(ct, cal, xs)
    R1 = voronoi_R1(ct, xs, y) if y is not None else None
    out = []
    for i, x in enumerate(xs):
        r1 = float(R1[i]) if R1 is not None else None
        out.append(ErrorSample(x=float(x), D0=float(D0[i]), D1=float(D1[i]),
                               delta0=float(d0[i]), delta1=float(d1[i]), y=y, R1=r1,
                               R2=float(d1[i]) - r1 if r1 is not None else None))
    return out


def write_sidecar(cal: CalibrationConstants, path) -> None:
    lines = [f"A={cal.A!r}", f"Z0={cal.Z0!r}", f"method={cal.method}",
             f"residual={cal.residual!r}"]
    if cal.samples:
        lines.append(f"samples={cal.samples}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sidecar(path) -> CalibrationConstants:
    vals = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}: expected key=value, got {raw!r}")
        vals[key.strip()] = value.strip()
    try:
        return CalibrationConstants(A=float(vals["A"]), Z0=float(vals["Z0"]),
                                    method=vals.get("method", "user-supplied"),
                                    residual=float(vals.get("residual", 0.0)),
                                    samples=vals.get("samples", ""))
    except KeyError as exc:
        raise ValueError(f"{path}: missing key {exc.args[0]}") from None
