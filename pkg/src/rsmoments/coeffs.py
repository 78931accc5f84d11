"""Exact cusp-form coefficients and Rankin-Selberg convolution coefficients.

For weight 12 the normalized eigenform is Ramanujan's Delta, whose
coefficients tau(n) are produced from Jacobi's identity

    prod (1 - q^n)^3 = sum_k (-1)^k (2k+1) q^{k(k+1)/2}

by three exact truncated squarings: Delta = q * (prod (1 - q^n)^3)^8.
The seed series has only ~sqrt(2N) nonzero terms.  Big-integer polynomial
multiplication is delegated to FLINT.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from math import isqrt
from pathlib import Path

import numpy as np

from .summation import as_extended, compensated_cumsum

__all__ = [
    "WeightConfig",
    "FourierTable",
    "CoeffTable",
    "CacheFormatError",
    "UnsupportedWeightError",
    "compute_fourier",
    "load_fourier",
    "save_fourier",
    "compute_coeffs",
    "save_coeffs",
    "load_coeffs",
]

CACHE_MAGIC = "# rsmoments tau v1"
_HEADER_RE = re.compile(r"^# rsmoments tau v1 kappa=(\d+) N=(\d+)\s*$")


class CacheFormatError(ValueError):
    """Raised for malformed coefficient cache files; carries the line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedWeightError(ValueError):
    pass


@dataclass(frozen=True)
class WeightConfig:
    N: int
    kappa: int = 12

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.kappa < 12 or self.kappa % 2:
            raise ValueError(f"kappa must be even and >= 12, got {self.kappa}")


@dataclass(frozen=True, eq=False)
class FourierTable:
    """Exact Fourier coefficients a(1..N); ``a[0]`` is a zero placeholder."""

    kappa: int
    N: int
    a: tuple

    def __post_init__(self):
        if len(self.a) != self.N + 1:
            raise ValueError(f"expected {self.N + 1} entries, got {len(self.a)}")

    def __getitem__(self, n: int) -> int:
        if not 1 <= n <= self.N:
            raise IndexError(f"a({n}) outside table 1..{self.N}")
        return self.a[n]

    def __eq__(self, other):
        if not isinstance(other, FourierTable):
            return NotImplemented
        return (self.kappa, self.N, self.a) == (other.kappa, other.N, other.a)

    __hash__ = None


def _jacobi_cube(length: int) -> list[int]:
    seed = [0] * length
    k = 0
    while k * (k + 1) // 2 < length:
        seed[k * (k + 1) // 2] = (-1) ** k * (2 * k + 1)
        k += 1
    return seed


def compute_fourier(cfg: WeightConfig) -> FourierTable:
    """tau(n) for n <= cfg.N via the Jacobi-cube construction."""
    if cfg.kappa != 12:
        raise UnsupportedWeightError(
            f"unsupported weight {cfg.kappa}: only kappa=12 is built in; "
            "supply coefficients with load_fourier"
        )
    import flint

    N = cfg.N
    try:
        series = flint.fmpz_poly(_jacobi_cube(N))
        for _ in range(3):
            series = series.mul_low(series, N)
        coeffs = series.coeffs()
        del series
        # Delta = q * E^8, so a(n) is the coefficient of q^(n-1).
        a = [0] * (N + 1)
        for i, v in enumerate(coeffs[:N]):
            a[i + 1] = int(v)
        del coeffs
    except MemoryError as exc:
        raise MemoryError(f"out of memory computing tau(n) for N={N}") from exc
    return FourierTable(kappa=12, N=N, a=tuple(a))


def save_fourier(table: FourierTable, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".part")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"{CACHE_MAGIC} kappa={table.kappa} N={table.N}\n")
        chunk = 100_000
        for start in range(1, table.N + 1, chunk):
            stop = min(start + chunk, table.N + 1)
            fh.write("".join(f"{n},{table.a[n]}\n" for n in range(start, stop)))
    os.replace(tmp, path)


def load_fourier(
    path: str | os.PathLike, kappa: int | None = None, N: int | None = None
) -> FourierTable:
    """Parse a cache file.  ``kappa``/``N`` if given must match the header
    (a larger stored N is accepted and truncated)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header)
        if not m:
            raise CacheFormatError(f"malformed header {header.rstrip()!r}", 1)
        file_kappa, file_N = int(m.group(1)), int(m.group(2))
        if kappa is not None and kappa != file_kappa:
            raise CacheFormatError(
                f"kappa mismatch: file has kappa={file_kappa}, requested {kappa}", 1
            )
        if N is not None and N > file_N:
            raise CacheFormatError(f"file holds N={file_N} < requested N={N}", 1)
        a = [0] * (file_N + 1)
        lineno = 1
        for lineno, line in enumerate(fh, start=2):
            n_tok, sep, v_tok = line.rstrip("\n").partition(",")
            if not sep:
                raise CacheFormatError(f"expected '<n>,<a(n)>', got {line.rstrip()!r}", lineno)
            try:
                n, v = int(n_tok), int(v_tok)
            except ValueError:
                raise CacheFormatError(f"non-integer token in {line.rstrip()!r}", lineno) from None
            if n != lineno - 1 or n > file_N:
                raise CacheFormatError(f"expected index {lineno - 1}, got {n}", lineno)
            a[n] = v
        if lineno - 1 != file_N:
            raise CacheFormatError(
                f"truncated file: {lineno - 1} rows, header declares N={file_N}", lineno
            )
    table = FourierTable(kappa=file_kappa, N=file_N, a=tuple(a))
    if N is not None and N < file_N:
        table = FourierTable(kappa=file_kappa, N=N, a=table.a[: N + 1])
    return table


@dataclass(frozen=True, eq=False)
class CoeffTable:
    """Floating-point lambda(n) and c_n for 0 <= n <= N (index 0 is zero).

    ``S_hi[j] + S_lo[j]`` is the compensated prefix sum sum_{m<=n} m^j c_m
    for j = 0..3.
    """

    N: int
    kappa: int
    lam: np.ndarray
    c: np.ndarray
    S_hi: np.ndarray
    S_lo: np.ndarray
    cross_path_max_rel: float = 0.0
    source: str = "tau"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.lam, self.c, self.S_hi, self.S_lo):
            arr.setflags(write=False)

    @classmethod
    def from_values(cls, c, lam=None, kappa: int = 12, source: str = "synthetic") -> "CoeffTable":
        """Build a table directly from c_1..c_N (test hook / external data)."""
        c = np.asarray(c, dtype=np.float64)
        full = np.zeros(c.size + 1)
        full[1:] = c
        lam_full = np.zeros_like(full)
        if lam is not None:
            lam_full[1:] = np.asarray(lam, dtype=np.float64)
        S_hi, S_lo = _prefix_sums(full)
        return cls(N=c.size, kappa=kappa, lam=lam_full, c=full, S_hi=S_hi, S_lo=S_lo,
                   source=source)

    def prefix(self, j: int, n) -> np.ndarray:
        """sum_{m<=n} m^j c_m in extended precision (n clipped below at 0)."""
        idx = np.clip(np.asarray(n, dtype=np.int64), 0, self.N)
        return as_extended(self.S_hi[j][idx], self.S_lo[j][idx])

    def weights(self) -> np.ndarray:
        """c_n / n^(7/8), the coefficients of the truncated Voronoi sum."""
        w = self._cache.get("w")
        if w is None:
            n = np.arange(self.N + 1, dtype=np.float64)
            n[0] = 1.0
            w = self.c / n**0.875
            w[0] = 0.0
            w.setflags(write=False)
            self._cache["w"] = w
        return w

    def truncated(self, N: int) -> "CoeffTable":
        if N > self.N:
            raise ValueError(f"cannot extend table of size {self.N} to {N}")
        return CoeffTable(N=N, kappa=self.kappa, lam=self.lam[: N + 1], c=self.c[: N + 1],
                          S_hi=self.S_hi[:, : N + 1], S_lo=self.S_lo[:, : N + 1],
                          cross_path_max_rel=self.cross_path_max_rel, source=self.source)


def _prefix_sums(c: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(c.size, dtype=np.float64)
    S_hi = np.empty((4, c.size))
    S_lo = np.empty((4, c.size))
    term = c.copy()
    for j in range(4):
        S_hi[j], S_lo[j] = compensated_cumsum(term)
        term *= n
    return S_hi, S_lo


def _literal_convolution(a: tuple, kappa: int) -> np.ndarray:
    """c_n = n^(1-kappa) sum_{m^2|n} m^(2(kappa-1)) a(n/m^2)^2, each value
    the correctly rounded float of the exact rational."""
    N = len(a) - 1
    w = kappa - 1
    num = [v * v for v in a]
    sq = num[:]
    for m in range(2, isqrt(N) + 1):
        m2 = m * m
        mw = m ** (2 * w)
        for j in range(1, N // m2 + 1):
            num[m2 * j] += mw * sq[j]
    del sq
    out = np.empty(N + 1)
    out[0] = 0.0
    out[1:] = [num[n] / n**w for n in range(1, N + 1)]
    return out


def compute_coeffs(ft: FourierTable, cross_check: bool = True) -> CoeffTable:
    """lambda(n) = a(n) n^{-(kappa-1)/2} and the convolution coefficients c_n.

    c_n is computed exactly from the literal definition and independently as
    sum_{m^2|n} lambda(n/m^2)^2; the two must agree to 1e-12 relative.
    """
    N, kappa = ft.N, ft.kappa
    n = np.arange(N + 1, dtype=np.float64)
    n[0] = 1.0
    a_float = np.fromiter((float(v) for v in ft.a), dtype=np.float64, count=N + 1)
    lam = a_float * n ** (-(kappa - 1) / 2)
    lam[0] = 0.0
    lam2 = lam * lam
    c_lam = lam2.copy()
    for m in range(2, isqrt(N) + 1):
        m2 = m * m
        c_lam[m2::m2] += lam2[1 : N // m2 + 1]

    max_rel = 0.0
    c = c_lam
    if cross_check:
        c_lit = _literal_convolution(ft.a, kappa)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.abs(c_lit[1:] - c_lam[1:]) / np.abs(c_lit[1:])
        rel = np.where(c_lit[1:] == 0, np.abs(c_lam[1:]), rel)
        max_rel = float(rel.max()) if N else 0.0
        if max_rel > 1e-12:
            worst = int(np.argmax(rel)) + 1
            raise ArithmeticError(
                f"convolution paths disagree at n={worst}: relative error {max_rel:.3e}"
            )
        c = c_lit
    S_hi, S_lo = _prefix_sums(c)
    return CoeffTable(N=N, kappa=kappa, lam=lam, c=c, S_hi=S_hi, S_lo=S_lo,
                      cross_path_max_rel=max_rel)


def save_coeffs(ct: CoeffTable, path: str | os.PathLike) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".part.npz")
    np.savez(tmp, N=ct.N, kappa=ct.kappa, lam=ct.lam, c=ct.c, S_hi=ct.S_hi, S_lo=ct.S_lo,
             cross=ct.cross_path_max_rel)
    os.replace(tmp, path)


def load_coeffs(path: str | os.PathLike) -> CoeffTable:
    with np.load(path) as z:
        return CoeffTable(N=int(z["N"]), kappa=int(z["kappa"]), lam=z["lam"], c=z["c"],
                          S_hi=z["S_hi"], S_lo=z["S_lo"],
                          cross_path_max_rel=float(z["cross"]))


def divisor_count_table(N: int) -> np.ndarray:
    """d(n) for 0 <= n <= N by sieve (d(0) = 0)."""
    d = np.zeros(N + 1, dtype=np.int64)
    for k in range(1, N + 1):
        d[k::k] += 1
    return d


def primes_upto(N: int) -> np.ndarray:
    sieve = np.ones(N + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, isqrt(N) + 1):
        if sieve[p]:
            sieve[p * p :: p] = False
    return np.flatnonzero(sieve)


def deligne_ok(a: int, n: int, d: int, kappa: int) -> bool:
    """|a| <= n^{(kappa-1)/2} d(n), checked as a^2 <= n^{kappa-1} d^2 exactly."""
    return a * a <= n ** (kappa - 1) * d * d

