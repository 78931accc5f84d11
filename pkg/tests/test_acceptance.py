"""Acceptance criteria, one test per criterion.

Every test records a ``criterion N: PASS|FAIL`` line (shown in the terminal
summary) and then asserts the same condition.  Reports produced through the
CLI are archived under ``reports/acceptance`` (override with
RSMOMENTS_REPORTS); the N = 10^7 coefficient table lives in the pytest cache
directory and is built on first use (about 90 s and 3.6 GB of memory).
"""

import itertools
import math
import os
import random
import time
from fractions import Fraction
from math import gcd
from pathlib import Path

import numpy as np
import pytest

from oracles import (
    brute_count_near,
    brute_count_rs,
    exact_delta1_power_integral,
    naive_solutions,
    numeric_zero_mask,
)
from rsmoments.cli import main
from rsmoments.coeffs import (
    WeightConfig,
    compute_coeffs,
    compute_fourier,
    deligne_ok,
    divisor_count_table,
    primes_upto,
)
from rsmoments.constants import s_kl
from rsmoments.errterm import riesz_mean
from rsmoments.moments import integrate_delta1_power
from rsmoments.radicals import (
    CountQuery,
    alpha_zero_mask,
    count_near_solutions,
    count_rs,
    near_count_bound,
)

pytestmark = pytest.mark.acceptance

BIG_N = 10_000_000
REPORT_DIR = Path(os.environ.get("RSMOMENTS_REPORTS",
                                 Path(__file__).resolve().parents[1] / "reports" / "acceptance"))


@pytest.fixture(scope="session")
def big_cache(request):
    path = request.config.cache.mkdir("rsmoments-N1e7")
    if not (path / f"coeffs_k12_N{BIG_N}.npz").exists():
        assert main(["coeffs", "--n", str(BIG_N), "--cache", str(path)]) == 0
    return path


_RUNS: dict = {}


@pytest.fixture(scope="session")
def cli_report(tmp_path_factory):
    """Run a CLI command once per (name, threads), archive the report and
    return its text."""
    REPORT_DIR.mkdir(parents=True, exist_ok=True)

    def run(name: str, argv: list, threads: int = 1) -> str:
        key = (name, threads)
        if key not in _RUNS:
            out = REPORT_DIR / f"{name}.threads{threads}.csv"
            code = main([str(a) for a in argv] + ["--threads", str(threads), "--out", str(out)])
            assert code == 0, f"{name}: exit code {code}"
            _RUNS[key] = out.read_text()
        return _RUNS[key]
    return run


def table_rows(text: str) -> list[dict]:
    lines = [line for line in text.splitlines() if line and not line.startswith("#")]
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


# --- 1. exact arithmetic -------------------------------------------------

def test_criterion_1_exact_arithmetic(verdict):
    t0 = time.perf_counter()
    N = 100_000
    ft = compute_fourier(WeightConfig(N=N))
    a = ft.a
    mult = sum(1 for m in range(2, math.isqrt(N) + 1) for n in range(m + 1, N // m + 1)
               if gcd(m, n) == 1 and a[m * n] != a[m] * a[n])
    hecke = 0
    for p in map(int, primes_upto(N)):
        pk = [1, a[p]]
        while p ** len(pk) <= N:
            pk.append(a[p] * pk[-1] - p**11 * pk[-2])
        hecke += sum(1 for j, v in enumerate(pk) if a[p**j] != v)
    d = divisor_count_table(N)
    deligne = sum(1 for n in range(1, N + 1) if not deligne_ok(a[n], n, int(d[n]), 12))
    ct = compute_coeffs(ft)
    # lambda^2 from exact rationals, then c_n = sum over m^2 | n of lambda(n/m^2)^2
    lam2 = np.array([float(Fraction(v * v, n**11)) if n else 0.0 for n, v in enumerate(a)])
    c_ref = lam2.copy()
    for m in range(2, math.isqrt(N) + 1):
        c_ref[m * m :: m * m] += lam2[1 : N // (m * m) + 1]
    ref_rel = float(np.max(np.abs(ct.c[1:] - c_ref[1:]) / np.abs(c_ref[1:])))
    seconds = time.perf_counter() - t0
    ok = (mult == hecke == deligne == 0 and ct.cross_path_max_rel <= 1e-12
          and ref_rel <= 1e-12 and seconds < 120)
    verdict(1, ok, f"violations multiplicative={mult} hecke={hecke} deligne={deligne}; "
                   f"cross-path max rel={ct.cross_path_max_rel:.2e}, vs exact lambda^2 path "
                   f"{ref_rel:.2e}; {seconds:.0f}s")
    assert ok


# --- 2. oracle equivalence -----------------------------------------------

def test_criterion_2_oracle_equivalence(verdict, table_small):
    mismatches = zeros = total = 0
    for k, N in ((3, 200), (4, 60)):
        rest = np.indices((N,) * (k - 1)).reshape(k - 1, -1).T + 1
        for i in itertools.product((0, 1), repeat=k - 1):
            for n1 in range(1, N + 1):
                ns = np.column_stack([np.full(len(rest), n1), rest])
                kernel = alpha_zero_mask(ns, i)
                numeric = numeric_zero_mask(ns, i)
                mismatches += int(np.count_nonzero(kernel != numeric))
                zeros += int(np.count_nonzero(kernel))
                total += len(ns)
    sols = naive_solutions(3, 2, 16)
    w = table_small.weights()
    naive = math.fsum(math.prod(w[n] for n in ns) for ns in sols)
    c = table_small.c
    closed = c[1] ** 2 * c[16] / 16**0.875
    got = s_kl(3, 2, 16, table_small).value
    ok = (mismatches == 0 and sols == {(1, 1, 16)} and got == pytest.approx(naive, rel=1e-15)
          and got == pytest.approx(closed, rel=1e-15))
    verdict(2, ok, f"{total} tuples, {zeros} exact zeros, {mismatches} mismatches; "
                   f"s_3;2(16)={got!r} naive={naive!r}")
    assert ok


# --- 3. counting lemmas --------------------------------------------------

def _random_queries(rng, count, H_choices, max_tuples):
    out = []
    while len(out) < count:
        k = rng.choice((3, 4))
        H = rng.choice(H_choices)
        N = [H] + [rng.choice([v for v in (1, 2, 4, 8, 16, 32, 64, 128, 256) if v <= H])
                   for _ in range(k - 1)]
        rng.shuffle(N)
        if math.prod(N) > max_tuples:
            continue
        i = tuple(rng.randint(0, 1) for _ in range(k - 1))
        if not any(i):
            continue  # an all-plus sum is never small
        out.append(CountQuery(k=k, N=tuple(N), i=i,
                              delta=rng.choice((0.001, 0.01, 0.05, 0.2, 0.5, 1.0))))
    return out


def test_criterion_3_counting(verdict):
    rng = random.Random(20240)
    small = _random_queries(rng, 24, (1, 2, 4, 8), 600)
    bad = [q for q in small if count_near_solutions(q) != brute_count_near(q.N, q.i, q.delta)]
    rs_cases = [(rng.randint(1, 5), rng.choice((0.0, 0.001, 0.01, 0.05, 0.2))) for _ in range(8)]
    bad_rs = [(M, d) for M, d in rs_cases if count_rs(M, d, 0.25) != brute_count_rs(M, d, 0.25)]

    # One constant fitted over every tested query, H up to 256.  Counting the
    # last variable in its window gives the a-priori constant 8 * 2^{3/4}.
    queries = small + _random_queries(rng, 42, (4, 8, 16, 32, 64, 128, 256), 2 * 10**7)
    C = max(count_near_solutions(q) / near_count_bound(q) for q in queries)
    C_apriori = 8 * 2**0.75
    rs6 = count_rs(2, 0.01, 0.25)
    ok = not bad and not bad_rs and 0 < C <= C_apriori and rs6 == 6
    verdict(3, ok, f"{len(small)} near + {len(rs_cases)} rs brute-force recounts, "
                   f"{len(bad) + len(bad_rs)} mismatches; fitted C={C:.3f} over "
                   f"{len(queries)} queries (H<=256, a-priori {C_apriori:.2f}); "
                   f"count_rs(2, 0.01, 1/4)={rs6}")
    assert ok


# --- 4. analysis identities ----------------------------------------------

def test_criterion_4_analysis_identities(verdict, table_1e5, cal_1e5):
    ct = table_1e5
    # integral of the step function D_0, accumulated exactly one step at a time
    area = height = Fraction(0)
    areas, heights = [area], [height]
    for j in range(1, ct.N + 1):
        area += height
        height += Fraction(float(ct.c[j]))
        areas.append(area)
        heights.append(height)
    rng = np.random.default_rng(44)
    worst = 0.0
    for x in rng.uniform(1.0, 1e5, 1000):
        j = math.floor(x)
        exact = areas[j] + heights[j] * (Fraction(float(x)) - j)
        got = riesz_mean(ct, float(x), 1)
        worst = max(worst, abs(got - float(exact)) / abs(float(exact)))
    quad = {}
    for k in (2, 3, 4, 5):
        exact = float(exact_delta1_power_integral(ct.c, cal_1e5.A, cal_1e5.Z0, k, 1000, 10_000))
        got = integrate_delta1_power(ct, cal_1e5, k, 1000, 10_000).integral
        quad[k] = abs(got - exact) / abs(exact)
    ok = worst <= 1e-9 and max(quad.values()) <= 1e-9
    verdict(4, ok, f"D1 vs int D0 max rel {worst:.2e} at 1000 points; quadrature max rel "
                   + ", ".join(f"k={k}: {v:.1e}" for k, v in quad.items()))
    assert ok


# --- 5. second moment ----------------------------------------------------

def second_moment_argv(cache):
    return ["experiment", "second-moment", "--ts", "1e4,1e5,1e6", "--cache", cache]


@pytest.mark.slow
def test_criterion_5_second_moment(verdict, big_cache, cli_report):
    rows = table_rows(cli_report("second_moment", second_moment_argv(big_cache)))
    dev = {float(r["T"]): abs(float(r["ratio"]) - 1) for r in rows}
    devs = [dev[1e4], dev[1e5], dev[1e6]]
    decreasing = devs[0] > devs[1] > devs[2]
    ok = decreasing and devs[2] <= 0.25
    verdict(5, ok, "|ratio-1| at T=1e4,1e5,1e6: " + ", ".join(f"{v:.4f}" for v in devs)
            + ("" if decreasing else " (not decreasing)"))
    assert ok


# --- 6. odd and higher moments -------------------------------------------

def theorem_argv(cache):
    return ["experiment", "theorem", "--ts", "1e3,1e4,1e5,1e6", "--ks", "3,4,5",
            "--cache", cache]


@pytest.mark.slow
def test_criterion_6_higher_moments(verdict, big_cache, cli_report):
    rows = table_rows(cli_report("theorem", theorem_argv(big_cache)))
    ratio = {(int(r["k"]), float(r["T1"])): float(r["ratio"]) for r in rows}
    grid = (1e3, 1e4, 1e5, 1e6)
    problems, summary = [], []
    for k in (3, 4, 5):
        rs = [ratio[k, T] for T in grid]
        if k in (3, 4):
            negative = [T for T in grid[1:] if ratio[k, T] <= 0]
            if negative:
                problems.append(f"k={k} ratio <= 0 at T={negative}")
        # a nonpositive ratio has no logarithm and counts as a failed comparison
        logs = [abs(math.log(r)) if r > 0 else math.inf for r in rs]
        good = sum(1 for u, v in zip(logs, logs[1:]) if v <= u and math.isfinite(v))
        if good < 2:
            problems.append(f"k={k} |log ratio| non-increasing in {good}/3")
        summary.append(f"k={k} ratios " + "/".join(f"{r:.3f}" for r in rs))
    ok = not problems
    verdict(6, ok, "; ".join(summary) + ("" if ok else " -- " + "; ".join(problems))
            + f"; report {REPORT_DIR / 'theorem.threads1.csv'}")
    assert ok


# --- 7. scaling experiments ----------------------------------------------

R2_T = 1e6
R2_Y = R2_T ** (1 / 12)


def r2_argv(cache):
    return ["experiment", "r2-scaling", "--t", repr(R2_T),
            "--ys", f"{R2_Y!r},{4096 * R2_Y!r}", "--cache", cache]


OSC_ARGV = ["experiment", "oscillatory", "--alphas", "0,0.25,1", "--betas", "1,4,16",
            "--ts", "100,10000"]


@pytest.mark.slow
def test_criterion_7_scaling(verdict, big_cache, cli_report):
    r2 = table_rows(cli_report("r2_scaling", r2_argv(big_cache)))
    lo, hi = (float(r["integral"]) for r in r2)
    observed = lo / hi
    law = 4096**0.75
    r2_ok = law / 4 <= observed <= law * 4
    osc = table_rows(cli_report("oscillatory", OSC_ARGV))
    worst = max(float(r["ratio"]) for r in osc)
    ok = r2_ok and worst <= 10 and len(osc) == 36
    verdict(7, ok, f"R2 response ratio y vs 4096y = {observed:.3f} (y^(-3/4) law: {law:.0f}, "
                   f"accepted {law / 4:.0f}..{law * 4:.0f}); oscillatory max ratio {worst:.3f} "
                   f"over {len(osc)} cases")
    assert ok


# --- 8. determinism ------------------------------------------------------

def _without_column(text: str, name: str) -> str:
    out, idx = [], None
    for line in text.splitlines():
        if line.startswith("#"):
            out.append(line)
            continue
        cells = line.split(",")
        if idx is None:
            idx = cells.index(name)
        out.append(",".join(cells[:idx] + cells[idx + 1:]))
    return "\n".join(out)


@pytest.mark.slow
def test_criterion_8_determinism(verdict, big_cache, cli_report, tmp_path):
    small = tmp_path / "cache"  # filled by the coeffs run, which comes first
    runs = {
        "coeffs": ["coeffs", "--n", "100000", "--cache", small],
        "constants": ["constants", "--k", "3", "--trunc", "16", "--cache", small],
        "oracle_rs": ["oracle-count", "--mode", "rs", "--M", "2", "--delta", "0.01"],
        "oracle_near": ["oracle-count", "--ranges", "1,1,8", "--signs", "0,1", "--delta",
                        "1.0"],
        "second_moment": second_moment_argv(big_cache),
        "theorem": theorem_argv(big_cache),
        "r2_scaling": r2_argv(big_cache),
        "oscillatory": OSC_ARGV,
    }
    for k in (2, 3, 4, 5):
        runs[f"moment_k{k}"] = ["moment", "--k", str(k), "--t1", "1000", "--t2", "10000",
                                "--grid", "3", "--cache", small]
    differ = []
    for name, argv in runs.items():
        one, eight = cli_report(name, argv, 1), cli_report(name, argv, 8)
        if name.startswith("moment"):
            # wall time is the only field allowed to differ
            one, eight = _without_column(one, "seconds"), _without_column(eight, "seconds")
        if one != eight:
            differ.append(name)
    ok = not differ
    verdict(8, ok, f"{len(runs)} reports at threads 1 and 8, "
                   + ("all byte-identical" if ok else f"differing: {differ}")
                   + " (moment reports compared without the seconds column)")
    assert ok
