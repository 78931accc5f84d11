"""Command-line front end.

Every report starts with ``# key=value`` lines holding the resolved
configuration; feeding a report back through ``--config`` re-runs it.
Execution-only settings (thread count, cache directory, output path) are
left out of that header so that reports are byte-identical across them.

Exit codes: 0 success, 1 computation error, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .coeffs import (
    CacheFormatError,
    UnsupportedWeightError,
    WeightConfig,
    compute_coeffs,
    compute_fourier,
    load_coeffs,
    load_fourier,
    save_coeffs,
    save_fourier,
)
from .constants import B_k, second_moment_constant, theorem_coefficient
from .errterm import (
    CalibrationConstants,
    CalibrationError,
    calibrate_cross,
    read_sidecar,
    sample,
    write_sidecar,
)
from .moments import (
    integrate_delta1_power,
    moment_R2,
    oscillatory_bound,
    second_moment,
    second_moment_prediction,
    verify_theorem,
)
from .radicals import DEFAULT_BUDGET, BudgetExceeded, CountQuery, count_near_solutions, count_rs

REPORT_MAGIC = "# rsmoments report"
# Keys that never enter a report header.
_EXECUTION_KEYS = {"threads", "cache", "out", "config"}
COMMANDS = ("tau", "coeffs", "constants", "delta", "moment", "oracle-count", "calibrate",
            "experiment")


class UsageError(Exception):
    """Bad invocation or missing prerequisite (exit code 2)."""


@dataclass(frozen=True)
class RunConfig:
    N: int | None
    cache: Path
    kappa: int = 12
    A: float | None = None
    Z0: float | None = None
    threads: int = 1
    budget: int = DEFAULT_BUDGET
    report: str = "csv"

    @classmethod
    def from_args(cls, args) -> "RunConfig":
        cache = args.cache or os.environ.get("RSMOMENTS_CACHE") or "rsmoments-cache"
        if (args.A is None) != (args.Z0 is None):
            raise UsageError("--A and --Z0 must be given together")
        if args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        return cls(N=args.n, cache=Path(cache), kappa=args.kappa, A=args.A, Z0=args.Z0,
                   threads=args.threads, budget=args.budget, report=args.report)

    def tau_path(self, N: int) -> Path:
        return self.cache / f"tau_k{self.kappa}_N{N}.csv"

    def coeffs_path(self, N: int) -> Path:
        return self.cache / f"coeffs_k{self.kappa}_N{N}.npz"

    def sidecar_path(self, N: int) -> Path:
        return self.cache / f"calibration_k{self.kappa}_N{N}.txt"


# --- config files ----------------------------------------------------------

def read_config(path) -> dict[str, str]:
    """``key=value`` lines with ``#`` comments.  A report file is accepted
    too: the ``# key=value`` lines before its first data row are the
    configuration, and everything after them is ignored."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    is_report = bool(text) and text[0].startswith(REPORT_MAGIC)
    out = {}
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if is_report:
            if not line.startswith("#"):
                break  # the header ends at the first data row
            line = line[1:].strip()
            if "=" not in line:
                continue
        else:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


# --- formatting --------------------------------------------------------------

def fmt(v) -> str:
    """Shortest round-trip text for numbers; empty for None."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Report:
    def __init__(self, command: str, config: dict):
        self.lines = [f"{REPORT_MAGIC} v{__version__}", f"# command={command}"]
        for key in sorted(config):
            if key not in _EXECUTION_KEYS and config[key] is not None:
                self.lines.append(f"# {key}={fmt(config[key])}")

    def comment(self, text: str) -> None:
        self.lines.append(f"# {text}")

    def row(self, *values) -> None:
        self.lines.append(",".join(fmt(v) for v in values))

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        path = Path(out)
        tmp = path.with_name(path.name + ".part")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    else:
        sys.stdout.write(text)


# --- cache access ------------------------------------------------------------

def _cached_sizes(cfg: RunConfig) -> list[int]:
    if not cfg.cache.is_dir():
        return []
    prefix = f"coeffs_k{cfg.kappa}_N"
    sizes = []
    for p in cfg.cache.glob(f"{prefix}*.npz"):
        tail = p.name[len(prefix):-4]
        if tail.isdigit():
            sizes.append(int(tail))
    return sorted(sizes)


def load_table(cfg: RunConfig, need: float = 0):
    """Coefficient table from the cache: the file for ``--n`` if given, else
    the largest cached one.  Missing cache is a usage error."""
    if cfg.N is not None:
        path = cfg.coeffs_path(cfg.N)
        if not path.exists():
            raise UsageError(f"no coefficient cache at {path}; run `coeffs --n {cfg.N}` first")
    else:
        sizes = _cached_sizes(cfg)
        if not sizes:
            hint = max(int(math.ceil(need)), 1)
            raise UsageError(f"no coefficient cache in {cfg.cache}; run `coeffs --n {hint}` "
                             "first (or set RSMOMENTS_CACHE)")
        path = cfg.coeffs_path(sizes[-1])
    ct = load_coeffs(path)
    if need > ct.N:
        raise UsageError(f"range needs N >= {math.ceil(need)} but the cached table has "
                         f"N={ct.N}; run `coeffs --n {math.ceil(need)}` first")
    return ct


def resolve_calibration(cfg: RunConfig, ct) -> CalibrationConstants:
    """Flags, then the cached sidecar, then a fresh fit."""
    if cfg.A is not None:
        return CalibrationConstants(A=cfg.A, Z0=cfg.Z0)
    side = cfg.sidecar_path(ct.N)
    if side.exists():
        return read_sidecar(side)
    return calibrate_cross(ct)[0]


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


# --- subcommands -------------------------------------------------------------

def cmd_tau(args, cfg: RunConfig) -> str:
    if cfg.N is None or cfg.N < 1:
        raise UsageError("tau needs --n N with N >= 1")
    ft = compute_fourier(WeightConfig(N=cfg.N, kappa=cfg.kappa))
    lines = [f"# rsmoments tau v1 kappa={ft.kappa} N={ft.N}"]
    lines += [f"{n},{ft.a[n]}" for n in range(1, ft.N + 1)]
    return "\n".join(lines) + "\n"


def cmd_coeffs(args, cfg: RunConfig, config: dict) -> str:
    if cfg.N is None or cfg.N < 1:
        raise UsageError("coeffs needs --n N with N >= 1")
    cfg.cache.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tau_path = cfg.tau_path(cfg.N)
    if args.fourier:
        ft = load_fourier(args.fourier, kappa=cfg.kappa, N=cfg.N)
    elif tau_path.exists():
        ft = load_fourier(tau_path, kappa=cfg.kappa, N=cfg.N)
    else:
        ft = compute_fourier(WeightConfig(N=cfg.N, kappa=cfg.kappa))
        save_fourier(ft, tau_path)
    ct = compute_coeffs(ft)
    save_coeffs(ct, cfg.coeffs_path(cfg.N))
    rep = Report("coeffs", config)
    rep.row("N", "kappa", "cross_path_max_rel", "S0_N", "S1_N")
    rep.row(ct.N, ct.kappa, ct.cross_path_max_rel, float(ct.prefix(0, ct.N)),
            float(ct.prefix(1, ct.N)))
    print(f"wrote {cfg.coeffs_path(cfg.N)} in {time.perf_counter() - t0:.1f}s",
          file=sys.stderr)
    return rep.text()


def cmd_calibrate(args, cfg: RunConfig, config: dict) -> str:
    ct = load_table(cfg)
    c3, c2, gap, tol = calibrate_cross(ct)
    if args.save:
        write_sidecar(c3, cfg.sidecar_path(ct.N))
    rep = Report("calibrate", {**config, "n": ct.N})
    rep.row("rho", "A", "Z0", "residual")
    rep.row(2, c2.A, c2.Z0, c2.residual)
    rep.row(3, c3.A, c3.Z0, c3.residual)
    rep.comment(f"A_gap={fmt(gap)} tolerance={fmt(tol)}")
    return rep.text()


def cmd_constants(args, cfg: RunConfig, config: dict) -> str:
    if args.k not in (3, 4, 5):
        raise UsageError(f"--k must be 3, 4 or 5, got {args.k}")
    ct = load_table(cfg, need=args.trunc)
    trunc = args.trunc or ct.N
    parts: dict = {}
    B = B_k(args.k, trunc, ct, parts=parts)
    rep = Report("constants", {**config, "n": ct.N, "trunc": trunc})
    rep.row("k", "l", "N", "s_kl", "tail", "B_k")
    for l in range(1, args.k):
        rep.row(args.k, l, trunc, parts[l].value, parts[l].tail_estimate, B.value)
    c2 = second_moment_constant(trunc, ct)
    rep.comment(f"B_k_tail={fmt(B.tail_estimate)} coefficient_1T={fmt(theorem_coefficient(args.k, B.value))}")
    rep.comment(f"C2={fmt(c2.value)} C2_tail={fmt(c2.tail_estimate)}")
    return rep.text()


def cmd_delta(args, cfg: RunConfig, config: dict) -> str:
    if not 0 < args.x0 <= args.x1:
        raise UsageError(f"need 0 < x0 <= x1, got {args.x0}, {args.x1}")
    if args.count < 1:
        raise UsageError("--count must be >= 1")
    ct = load_table(cfg, need=args.x1)
    cal = resolve_calibration(cfg, ct)
    xs = np.linspace(args.x0, args.x1, args.count)
    y = args.y if args.y is not None else 0.0
    rep = Report("delta", {**config, "n": ct.N, "A": cal.A, "Z0": cal.Z0})
    rep.row("x", "D0", "D1", "delta1", "R1", "R2")
    for s in sample(ct, cal, xs, y=y):
        rep.row(s.x, s.D0, s.D1, s.delta1, s.R1, s.R2)
    return rep.text()


def _moment_rows(args, cfg, ct, cal):
    if args.grid < 1:
        raise UsageError("--grid must be >= 1")
    # 12 significant digits keep dyadic grids exact (2000.0, not 2000.0000000000002).
    edges = [float(f"{e:.12g}") for e in np.geomspace(args.t1, args.t2, args.grid + 1)]
    edges[0], edges[-1] = args.t1, args.t2
    C2 = B = None
    if args.y is None and args.k == 2:
        C2 = second_moment_constant(args.trunc or ct.N, ct).value
    if args.y is None and args.k in (3, 4, 5):
        B = B_k(args.k, args.trunc or ct.N, ct).value
    reps = []
    for a, b in zip(edges[:-1], edges[1:]):
        if args.y is not None:
            if not math.isclose(b, 2 * a, rel_tol=1e-12):
                raise UsageError("moments of R_2 (--y) are taken over dyadic ranges; "
                                 "use --t2 = 2*t1 and --grid 1")
            rep = moment_R2(ct, cal, args.k, a, args.y, threads=cfg.threads, signed=True)
        elif B is not None:
            rep = verify_theorem(args.k, ct, cal, B, a, b, threads=cfg.threads)
        else:
            rep = integrate_delta1_power(ct, cal, args.k, a, b, threads=cfg.threads)
            if C2 is not None:
                rep.prediction = second_moment_prediction(C2, a, b)
                rep.ratio = rep.integral / rep.prediction
        reps.append(rep)
    return reps


def cmd_moment(args, cfg: RunConfig, config: dict) -> str:
    if not 1 <= args.t1 < args.t2:
        raise UsageError(f"need 1 <= t1 < t2, got {args.t1}, {args.t2}")
    if not 1 <= args.k <= 6:
        raise UsageError(f"--k must be in 1..6, got {args.k}")
    ct = load_table(cfg, need=args.t2)
    cal = resolve_calibration(cfg, ct)
    reps = _moment_rows(args, cfg, ct, cal)
    rep = Report("moment", {**config, "n": ct.N, "A": cal.A, "Z0": cal.Z0})
    if cfg.report == "text":
        for r in reps:
            rep.lines.append(
                f"k={r.k} [{fmt(r.T1)}, {fmt(r.T2)}] y={fmt(r.y)}: integral {r.integral:.10e}"
                f"  prediction {r.prediction:.10e}  ratio {r.ratio:.6f}"
                f"  |integral| {r.abs_integral:.10e}  nodes {r.nodes}  ({r.seconds:.2f}s)")
        return rep.text()
    rep.row("k", "T1", "T2", "y", "integral", "prediction", "ratio", "nodes", "seconds",
            "abs_integral")
    for r in reps:
        rep.row(r.k, r.T1, r.T2, r.y, r.integral, r.prediction, r.ratio, r.nodes,
                round(r.seconds, 3), r.abs_integral)
    return rep.text()


def cmd_oracle_count(args, cfg: RunConfig, config: dict) -> str:
    rep = Report("oracle-count", config)
    rep.row("query", "count")
    if args.mode == "near":
        if args.ranges is None or args.signs is None or args.delta is None:
            raise UsageError("near mode needs --ranges, --signs and --delta")
        N = tuple(_ints(args.ranges))
        q = CountQuery(k=len(N), N=N, i=tuple(_ints(args.signs)), delta=args.delta)
        rep.row(q.describe(), count_near_solutions(q, budget=cfg.budget))
    else:
        if args.M is None or args.delta is None:
            raise UsageError("rs mode needs --M and --delta")
        count = count_rs(args.M, args.delta, args.c, budget=cfg.budget)
        rep.row(f"M={args.M};delta={args.delta!r};c={args.c!r}", count)
    return rep.text()


def experiment_second_moment(args, cfg, ct, cal, rep: Report) -> None:
    C2 = second_moment_constant(args.trunc or ct.N, ct)
    rep.comment(f"C2={fmt(C2.value)} C2_tail={fmt(C2.tail_estimate)}")
    rep.row("T", "integral", "prediction", "ratio", "abs_dev")
    for T in _floats(args.ts):
        r = second_moment(ct, cal, T, C2.value, threads=cfg.threads)
        rep.row(T, r.integral, r.prediction, r.ratio, abs(r.ratio - 1))


def experiment_theorem(args, cfg, ct, cal, rep: Report) -> None:
    rep.row("k", "T1", "T2", "B_k", "integral", "prediction", "ratio", "abs_integral",
            "coefficient_1T", "prediction_T1_exp")
    for k in _ints(args.ks):
        B = B_k(k, args.trunc or ct.N, ct).value
        for T in _floats(args.ts):
            r = verify_theorem(k, ct, cal, B, T, 2 * T, threads=cfg.threads)
            rep.row(k, T, 2 * T, B, r.integral, r.prediction, r.ratio, r.abs_integral,
                    r.extra["coefficient_1T"], r.extra["prediction_T1_exp"])


def experiment_r2_scaling(args, cfg, ct, cal, rep: Report) -> None:
    rep.row("p", "T", "y", "integral", "baseline", "ratio", "in_regime")
    T = args.t
    for y in _floats(args.ys):
        r = moment_R2(ct, cal, 2, T, y, threads=cfg.threads)
        rep.row(2, T, y, r.integral, r.prediction, r.ratio, r.extra["in_regime"])


def experiment_oscillatory(args, cfg, ct, cal, rep: Report) -> None:
    rep.row("alpha", "beta", "T", "g", "integral", "bound", "ratio")
    for alpha in _floats(args.alphas):
        for beta in _floats(args.betas):
            for T in _floats(args.ts):
                for g in ("cos", "sin"):
                    value, bound, ratio = oscillatory_bound(alpha, beta, T, g)
                    rep.row(alpha, beta, T, g, value, bound, ratio)


EXPERIMENTS = {
    "second-moment": (experiment_second_moment, "1e4,1e5,1e6"),
    "theorem": (experiment_theorem, "1e3,1e4,1e5,1e6"),
    "r2-scaling": (experiment_r2_scaling, None),
    "oscillatory": (experiment_oscillatory, "100,10000"),
}


def cmd_experiment(args, cfg: RunConfig, config: dict) -> str:
    if args.name is None:
        raise UsageError(f"experiment needs a name: one of {', '.join(sorted(EXPERIMENTS))}")
    func, default_ts = EXPERIMENTS[args.name]
    if args.ts is None:
        args.ts = default_ts
        config = {**config, "ts": default_ts}
    ct = cal = None
    if args.name != "oscillatory":
        if args.name == "r2-scaling":
            need = 2 * args.t
        else:
            need = max(_floats(args.ts)) * (2 if args.name == "theorem" else 1)
        ct = load_table(cfg, need=need)
        cal = resolve_calibration(cfg, ct)
        config = {**config, "n": ct.N, "A": cal.A, "Z0": cal.Z0}
    rep = Report("experiment", config)
    func(args, cfg, ct, cal, rep)
    return rep.text()


# --- argument parsing --------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key=value file (or an earlier report) supplying defaults")
    p.add_argument("--n", type=int, help="coefficient bound N")
    p.add_argument("--kappa", type=int, default=12)
    p.add_argument("--cache", help="cache directory (default $RSMOMENTS_CACHE)")
    p.add_argument("--A", type=float, help="override the fitted mean coefficient")
    p.add_argument("--Z0", type=float, help="override the fitted secondary constant")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET,
                   help="enumeration budget for counting queries")
    p.add_argument("--report", choices=("csv", "text"), default="csv")
    p.add_argument("--out", help="write the report here instead of standard output")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="rsmoments", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("tau", parents=[common], help="exact weight-12 coefficients as CSV")

    p = sub.add_parser("coeffs", parents=[common], help="build and cache the coefficient table")
    p.add_argument("--fourier", help="coefficient file in the cache format (any weight)")

    p = sub.add_parser("calibrate", parents=[common], help="fit A and Z0 at rho = 2 and 3")
    p.add_argument("--save", action="store_true", help="store the rho=3 fit as the sidecar")

    p = sub.add_parser("constants", parents=[common], help="s_{k;l} and B_k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trunc", type=int, default=None, help="truncation (default: table N)")

    p = sub.add_parser("delta", parents=[common], help="D_0, D_1, Delta_1, R_1, R_2 samples")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--x1", type=float, required=True)
    p.add_argument("--count", type=int, default=11)
    p.add_argument("--y", type=float, default=None)

    p = sub.add_parser("moment", parents=[common], help="integral of Delta_1^k or R_2^k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--t1", type=float, required=True)
    p.add_argument("--t2", type=float, required=True)
    p.add_argument("--y", type=float, default=None, help="integrate R_2(x; y)^k instead")
    p.add_argument("--grid", type=int, default=1, help="geometric subranges of [t1, t2]")
    p.add_argument("--trunc", type=int, default=None, help="truncation for B_k / C2")

    p = sub.add_parser("oracle-count", parents=[common], help="exact solution counts")
    p.add_argument("--mode", choices=("near", "rs"), default="near")
    p.add_argument("--ranges", help="N_1,...,N_k for the ranges (N_j, 2N_j]")
    p.add_argument("--signs", help="sign vector i_1,...,i_{k-1} of 0/1")
    p.add_argument("--delta", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--c", type=float, default=0.25)

    p = sub.add_parser("experiment", parents=[common], help="named experiment grids")
    p.add_argument("name", nargs="?", choices=sorted(EXPERIMENTS), default=None)
    p.add_argument("--ts", default=None, help="comma-separated T values")
    p.add_argument("--ks", default="3,4,5")
    p.add_argument("--t", type=float, default=1e6)
    p.add_argument("--ys", default="3.1622776601683795,12952.689296049683")
    p.add_argument("--alphas", default="0,0.25,1")
    p.add_argument("--betas", default="1,4,16")
    p.add_argument("--trunc", type=int, default=None)
    return parser


def _apply_config(parser, argv: list[str]) -> list[str]:
    """Splice the config file's values in front of the explicit flags, so
    that the explicit ones (parsed later) win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        values = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"cannot read config {known.config}: {exc.strerror}") from None
    command = values.pop("command", None)
    if not any(a in COMMANDS for a in argv):
        if command is None:
            raise UsageError(f"{known.config} names no command; give one on the command line")
        argv = [command] + argv
    pos = next(i for i, a in enumerate(argv) if a in COMMANDS)
    cmd = argv[pos]
    subparser = parser._subparsers._group_actions[0].choices[cmd]
    actions = {a.dest: a for a in subparser._actions}
    spliced = []
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise UsageError(f"{known.config}: unknown key {key!r} for {cmd}")
        if not action.option_strings:
            spliced.append(raw)
        elif isinstance(action, argparse._StoreTrueAction):
            if raw not in ("true", "false"):
                raise UsageError(f"{known.config}: bad value {raw!r} for {key}")
            if raw == "true":
                spliced.append(action.option_strings[0])
        else:
            spliced.append(f"{action.option_strings[0]}={raw}")
    return argv[: pos + 1] + spliced + argv[pos + 1 :]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"rsmoments: error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    handlers = {
        "coeffs": cmd_coeffs, "calibrate": cmd_calibrate, "constants": cmd_constants,
        "delta": cmd_delta, "moment": cmd_moment, "oracle-count": cmd_oracle_count,
        "experiment": cmd_experiment,
    }
    config = {k: v for k, v in vars(args).items() if k != "command"}
    try:
        cfg = RunConfig.from_args(args)
        if args.command == "tau":
            text = cmd_tau(args, cfg)
        else:
            text = handlers[args.command](args, cfg, config)
        _emit(text, args.out)
    except (UsageError, ValueError, UnsupportedWeightError, BudgetExceeded) as exc:
        if isinstance(exc, (CalibrationError, CacheFormatError)):
            print(f"rsmoments: {exc}", file=sys.stderr)
            return 1
        print(f"rsmoments: error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, MemoryError, RuntimeError) as exc:
        print(f"rsmoments: computation failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
