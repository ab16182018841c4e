"""Command-line interface: dissect, transitions, matrix, contract, liquidity,
simulate, calibrate, verify.

Every subcommand is a pure function of its input files, flags and seed;
outputs are written atomically (temp file + rename) so re-runs are
byte-identical.  Durations accept ``ms``/``s``/``m``/``h``/``d`` suffixes
and are handled internally as integer milliseconds.  Exit codes: 0 ok,
1 data error, 2 usage error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import mc
from .dc import ThresholdLadder, dissect, events_from_csv, events_to_csv
from .info import (calibrate_stream_info, info_summary, liquidity_stream)
from .markov import TransitionMatrix, analytic_matrix, contract as contract_matrix
from .network import TransitionLog, replay
from .scales import LadderSearchConfig, equal_probability_ladder, optimize_ladder
from .ticks import TickDataError, load_ticks, serialize_ticks

DEFAULT_N = 12
DEFAULT_DELTA1 = 0.00025
DEFAULT_RATIO = 2.0
DEFAULT_WINDOW = "1d"
DEFAULT_CADENCE = "1m"

_UNITS = {"ms": 1, "s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}


def parse_duration(text: str) -> int:
    """'1d' / '1m' / '5s' / '250ms' / bare integer milliseconds."""
    t = text.strip().lower()
    for suffix in ("ms", "s", "m", "h", "d"):
        if t.endswith(suffix):
            body = t[: -len(suffix)]
            if body and body.isdigit():
                return int(body) * _UNITS[suffix]
    if t.isdigit():
        return int(t)
    raise ValueError(f"cannot parse duration '{text}'")


def read_config_file(path: str) -> dict:
    """Plain key=value lines; '#' starts a comment; keys match long flags."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, value = body.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def write_atomic(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".inliq-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out_path):
    if out_path is None or out_path == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out_path, text)


def add_ladder_flags(p: argparse.ArgumentParser):
    p.add_argument("--ladder", help="comma-separated thresholds, e.g. 0.00025,0.0005")
    p.add_argument("--n", type=int, help="ladder size for the geometric family")
    p.add_argument("--delta1", type=float, help="smallest threshold")
    p.add_argument("--ratio", type=float, help="geometric ratio (default 2)")
    p.add_argument("--defaults", action="store_true",
                   help=f"n={DEFAULT_N}, delta1={DEFAULT_DELTA1}, ratio={DEFAULT_RATIO}, "
                        f"window {DEFAULT_WINDOW}, cadence {DEFAULT_CADENCE}")


def resolve_ladder(args, parser) -> ThresholdLadder:
    sources = 0
    if getattr(args, "ladder", None):
        sources += 1
    if getattr(args, "n", None) is not None or getattr(args, "delta1", None) is not None:
        sources += 1
    if getattr(args, "defaults", False):
        sources += 1
    if sources == 0:
        parser.error("no ladder given: use --ladder, --n/--delta1[/--ratio] or --defaults")
    if sources > 1:
        parser.error("exactly one ladder source allowed")
    if getattr(args, "defaults", False):
        return ThresholdLadder.geometric(DEFAULT_DELTA1, DEFAULT_N, DEFAULT_RATIO)
    if getattr(args, "ladder", None):
        return ThresholdLadder(tuple(float(v) for v in args.ladder.split(",")))
    if args.n is None or args.delta1 is None:
        parser.error("--n and --delta1 must be given together")
    ratio = args.ratio if args.ratio is not None else DEFAULT_RATIO
    return ThresholdLadder.geometric(args.delta1, args.n, ratio)


def ladder_to_flag(ladder: ThresholdLadder) -> str:
    return ",".join(repr(d) for d in ladder.deltas)


def _load_log(args, ladder, parser) -> TransitionLog:
    n = ladder.n
    if getattr(args, "transitions", None):
        with open(args.transitions, "r", encoding="utf-8") as fh:
            return TransitionLog.from_csv(fh.read(), n)
    if getattr(args, "events", None):
        with open(args.events, "r", encoding="utf-8") as fh:
            streams = events_from_csv(fh.read())
        if len(streams) < n:
            from .dc import EventStream
            streams += [EventStream(i, [], [], [], [], [])
                        for i in range(len(streams), n)]
        return replay(streams, n)
    if not getattr(args, "input", None):
        parser.error("need a tick file, --events or --transitions")
    series = load_ticks(args.input)
    return replay(dissect(series, ladder), n)


def cmd_simulate(args, parser):
    cfg = mc.SimConfig(sigma=args.sigma, dt=args.dt, steps=args.steps, mu=args.mu,
                       x0=args.x0, seed=args.seed, t0_ms=args.t0_ms)
    series = mc.simulate_path(cfg, instrument=args.instrument)
    emit(serialize_ticks(series), args.out)
    return 0


def cmd_dissect(args, parser):
    ladder = resolve_ladder(args, parser)
    series = load_ticks(args.input)
    streams = dissect(series, ladder, initial_mode=args.initial_mode)
    emit(events_to_csv(streams), args.out)
    return 0


def cmd_transitions(args, parser):
    ladder = resolve_ladder(args, parser)
    log = _load_log(args, ladder, parser)
    emit(log.to_csv(), args.out)
    return 0


def cmd_matrix(args, parser):
    ladder = resolve_ladder(args, parser)
    emit(analytic_matrix(ladder).to_csv(), args.out)
    return 0


def cmd_contract(args, parser):
    with open(args.matrix, "r", encoding="utf-8") as fh:
        m = TransitionMatrix.from_csv(fh.read(), n=args.n)
    emit(contract_matrix(m).to_csv(), args.out)
    return 0


def cmd_liquidity(args, parser):
    ladder = resolve_ladder(args, parser)
    window = parse_duration(args.window)
    cadence = parse_duration(args.cadence)
    log = _load_log(args, ladder, parser)
    matrix = analytic_matrix(ladder)
    info = info_summary(matrix, chain_length=args.h2_steps,
                        truncation_lag=args.h2_lag, seed=args.seed)
    if args.calibrate:
        cal_ms = parse_duration(args.calibrate)
        cut = int(log.times[0]) + cal_ms if len(log) else 0
        head = np.searchsorted(log.times, cut, side="right")
        if head < 2:
            raise ValueError("calibration window contains fewer than 2 transitions")
        cal_log = TransitionLog(log.n, log.times[:head], log.from_states[:head],
                                log.to_states[:head], log.triggers[:head])
        info = calibrate_stream_info(cal_log, matrix, window_ms=window)
    frame = liquidity_stream(log, matrix, info, window, cadence, k_min=args.k_min)
    emit(frame.to_csv(), args.out)
    return 0


def cmd_calibrate(args, parser):
    if args.objective == "equal-prob" and not args.search:
        ladder = equal_probability_ladder(args.delta1, args.n)
        value = 0.5
        print("objective equal-prob (closed form)")
    else:
        cfg = LadderSearchConfig(n=args.n, delta1=args.delta1, objective=args.objective,
                                 ratio_lo=args.ratio_lo, ratio_hi=args.ratio_hi,
                                 tol=args.tol, seed=args.seed,
                                 h2_chain_length=args.h2_steps, h2_lag=args.h2_lag)
        ladder, value = optimize_ladder(cfg)
        ratio = ladder[1] / ladder[0] if args.n > 1 else float("nan")
        print(f"objective {args.objective}: value {value!r} at ratio {ratio!r}")
    print("ladder " + ",".join(repr(d) for d in ladder.deltas))
    if args.emit_config:
        lines = ["# ladder calibration output",
                 f"ladder = {ladder_to_flag(ladder)}",
                 ""]
        write_atomic(args.emit_config, "\n".join(lines))
    return 0


def _verify_fit(args):
    ok = True
    for sigma in (args.sigma,) if args.sigma else (0.005, 0.01, 0.03):
        dt = (args.delta / mc.RESOLUTION_FACTOR / sigma) ** 2
        cfg = mc.SimConfig(sigma=sigma, dt=dt, steps=args.budget, seed=args.seed)
        rep = mc.verify_fit(cfg, args.delta, args.count)
        good = 0.98 <= rep.mean_ratio <= 1.02 and rep.ks_pvalue >= 0.01
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} fit sigma={sigma} mean_ratio={rep.mean_ratio:.4f} "
              f"ks_stat={rep.ks_statistic:.5f} ks_p={rep.ks_pvalue:.4f} n={rep.n_overshoots}")
    return ok

def _verify_passage(args):
    ok = True
    for rise, trail, mu_ in [(1.0, 1.0, 0.0), (2.0, 1.0, 0.0), (1.0, 1.0, 0.5),
                             (1.0, 1.0, -0.5), (1.5, 0.7, 1.0)]:
        ana, p, se = mc.first_passage_check(rise, trail, mu_, 1.0, args.count,
                                            seed=args.seed)
        good = abs(p - ana) <= 3.0 * se
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} passage rise={rise} trail={trail} mu={mu_} "
              f"mc={p:.5f} stderr={se:.5f} analytic={ana:.5f}")
    return ok

def _verify_two_threshold(args):
    ok = True
    for lam in (1.5, 2.0, 3.0):
        ana = math.exp(-(lam - 1.0))
        p, se = mc.first_passage_probability(lam - 1.0, 1.0, 0.0, 1.0, args.count,
                                             seed=args.seed)
        good = abs(p - ana) <= 3.0 * se
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} two-threshold ratio={lam} "
              f"mc={p:.5f} stderr={se:.5f} analytic={ana:.5f}")
    return ok

def _verify_contraction(args):
    rng = np.random.default_rng(args.seed)
    for n in range(2, 9):
        ratios = rng.uniform(1.2, 3.0, size=n - 1)
        deltas = 0.001 * np.cumprod(np.concatenate([[1.0], ratios]))
        full = analytic_matrix(ThresholdLadder(tuple(deltas)))
        reduced = analytic_matrix(ThresholdLadder(tuple(deltas[1:])))
        err = float(np.abs(contract_matrix(full).dense() - reduced.dense()).max())
        good = err <= 1e-12
        print(f"{'PASS' if good else 'FAIL'} contraction n={n} max_err={err:.3e}")
        if not good:
            return False
    return True

VERIFY_SUITES = {
    "fit": _verify_fit,
    "passage": _verify_passage,
    "two-threshold": _verify_two_threshold,
    "contraction": _verify_contraction,
}


def cmd_verify(args, parser):
    suites = VERIFY_SUITES if args.suite == "all" else {args.suite: VERIFY_SUITES[args.suite]}
    ok = True
    for name, fn in suites.items():
        ok &= fn(args)
    print("VERIFY " + ("PASS" if ok else "FAIL"))
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inliq",
        description="Intrinsic-time dissection, market-state transitions and rolling liquidity.")
    parser.add_argument("--config", help="key=value file supplying defaults for flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a simulated tick CSV")
    p.add_argument("--sigma", type=float, required=True, help="volatility per sqrt-second")
    p.add_argument("--mu", type=float, default=0.0, help="drift per second")
    p.add_argument("--dt", type=float, required=True, help="step in seconds")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--x0", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t0-ms", type=int, default=0)
    p.add_argument("--instrument", default="sim")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dissect", help="tick CSV -> directional-change events CSV")
    p.add_argument("input", help="tick CSV file (.gz ok)")
    add_ladder_flags(p)
    p.add_argument("--initial-mode", choices=("up", "down"), default="up")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dissect)

    p = sub.add_parser("transitions", help="ticks or events -> state transitions CSV")
    p.add_argument("input", nargs="?", help="tick CSV file")
    p.add_argument("--events", help="events CSV from 'dissect'")
    add_ladder_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_transitions)

    p = sub.add_parser("matrix", help="analytic transition matrix as from,to,prob CSV")
    add_ladder_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("contract", help="drop the smallest scale from a matrix CSV")
    p.add_argument("--matrix", required=True, help="matrix CSV file")
    p.add_argument("--n", type=int, default=None, help="bit count (inferred if omitted)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_contract)

    p = sub.add_parser("liquidity", help="rolling liquidity CSV from ticks/events/transitions")
    p.add_argument("input", nargs="?", help="tick CSV file")
    p.add_argument("--events", help="events CSV from 'dissect'")
    p.add_argument("--transitions", help="transitions CSV from 'transitions'")
    add_ladder_flags(p)
    p.add_argument("--window", default=DEFAULT_WINDOW)
    p.add_argument("--cadence", default=DEFAULT_CADENCE)
    p.add_argument("--k-min", type=int, default=30,
                   help="flag windows with fewer transitions as low confidence")
    p.add_argument("--h2-steps", type=int, default=10_000_000,
                   help="chain length for the h2 estimator")
    p.add_argument("--h2-lag", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--calibrate", default=None, metavar="DURATION",
                   help="estimate h1/h2 from the leading DURATION of the stream "
                        "instead of the model chain")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_liquidity)

    p = sub.add_parser("calibrate", help="preferred-scale ladder search")
    p.add_argument("--objective", choices=("equal-prob", "max-h1", "max-h2"),
                   required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta1", type=float, required=True)
    p.add_argument("--search", action="store_true",
                   help="force the golden-section search even for equal-prob")
    p.add_argument("--ratio-lo", type=float, default=1.01)
    p.add_argument("--ratio-hi", type=float, default=4.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h2-steps", type=int, default=2_000_000)
    p.add_argument("--h2-lag", type=int, default=64)
    p.add_argument("--emit-config", default=None,
                   help="write the ladder as a --config file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="run a named verification suite")
    p.add_argument("suite", choices=sorted(VERIFY_SUITES) + ["all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=200_000,
                   help="overshoots or paths per check")
    p.add_argument("--budget", type=int, default=2_000_000_000,
                   help="step budget for path simulations")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--delta", type=float, default=0.005)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    # a config file provides defaults; explicit flags override it
    if "--config" in argv:
        idx = argv.index("--config")
        if idx + 1 < len(argv):
            try:
                defaults = read_config_file(argv[idx + 1])
            except (OSError, ValueError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 1
            for action in parser._subparsers._group_actions:
                if isinstance(action, argparse._SubParsersAction):
                    for sp in action.choices.values():
                        coerced = {}
                        for a in sp._actions:
                            if a.dest not in defaults:
                                continue
                            raw = defaults[a.dest]
                            if isinstance(a, (argparse._StoreTrueAction,
                                              argparse._StoreFalseAction)):
                                coerced[a.dest] = raw.lower() in ("1", "true", "yes", "on")
                            elif a.type is not None:
                                try:
                                    coerced[a.dest] = a.type(raw)
                                except (TypeError, ValueError):
                                    print(f"error: config value {a.dest}={raw!r} "
                                          f"is invalid", file=sys.stderr)
                                    return 1
                            else:
                                coerced[a.dest] = raw
                        sp.set_defaults(**coerced)
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (TickDataError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
