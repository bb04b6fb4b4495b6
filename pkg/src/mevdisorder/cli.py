"""Command-line entry point: ``entropy``, ``simulate``, ``compare``, ``oracle-check``.

Exit status is 0 on success, 1 on a runtime or check failure and 2 on a
usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import builders
from .builders import STRATEGY_NAMES, CombinatorialLimitError, Mempool
from .engine import ConfigError, ExperimentConfig, ExperimentReport, compare, run_experiment
from .info_theory import binomial_entropy_asymptotic, binomial_entropy_exact
from .market import ChainState, PayoffModel, TraderTrade, trader

SUMMARY_KEYS = (
    "strategy", "mean_block_mev", "mean_terminal_disorder", "entropy_final_bits",
    "good_mev_count", "bad_mev_count", "seed",
)
CONFIG_KEYS = (
    "p", "n", "blocks_per_run", "mempool_size", "runs", "strategy",
    "unit_value", "alpha", "master_seed", "oracle_limit",
)
_INT_KEYS = {"n", "blocks_per_run", "mempool_size", "runs", "unit_value", "master_seed", "oracle_limit"}
_FLOAT_KEYS = {"p", "alpha"}


class UsageError(Exception):
    pass


def fmt(value: Any) -> str:
    """Render one table cell; floats get 9 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".9g")
    return str(value)


def _table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _rounded(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        return float(format(float(value), ".9g"))
    if isinstance(value, np.integer):
        return int(value)
    return value


# ---------------------------------------------------------------- config


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, Any] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def _coerce(key: str, value: str) -> Any:
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None
    return value


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % 2**64)


def resolve_config(args: argparse.Namespace, strategy: str | None = None) -> ExperimentConfig:
    """Defaults, then config-file keys, then explicit flags."""
    merged: dict[str, Any] = {}
    if getattr(args, "config", None):
        merged.update(read_config_file(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    if strategy is not None:
        merged["strategy"] = strategy
    if "master_seed" not in merged:
        merged["master_seed"] = _fresh_seed()
    unit = merged.pop("unit_value", 1)
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {k: v for k, v in merged.items() if k in known}
    try:
        return ExperimentConfig(
            payoff=PayoffModel.linear(unit),
            carry_over=getattr(args, "carry_over", False),
            bundle_as_one_slot=getattr(args, "bundle_as_one_slot", False),
            **kwargs,
        )
    except (ConfigError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _add_config_flags(p: argparse.ArgumentParser, with_strategy: bool) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    if with_strategy:
        p.add_argument("--strategy", choices=STRATEGY_NAMES)
    p.add_argument("--p", type=float, help="trader buy probability")
    p.add_argument("--n", type=int, help="block size")
    p.add_argument("--mempool", dest="mempool_size", type=int, help="mempool size M")
    p.add_argument("--blocks", dest="blocks_per_run", type=int, help="blocks per run")
    p.add_argument("--runs", type=int)
    p.add_argument("--unit-value", dest="unit_value", type=int, help="payoff per unit closed")
    p.add_argument("--alpha", type=float, help="auction tip fraction")
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--oracle-limit", dest="oracle_limit", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--carry-over", action="store_true", help="keep unused trades for the next block")
    p.add_argument("--bundle-as-one-slot", action="store_true")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="directory for detailed CSV tables")


# ---------------------------------------------------------------- reports


def summary_row(report: ExperimentReport) -> list[Any]:
    s = report.summary()
    return [s[k] for k in SUMMARY_KEYS]


def trajectory_rows(report: ExperimentReport) -> list[list[Any]]:
    t = report.trajectory
    rows = []
    for k, h in enumerate(t.per_step_entropy):
        delta = t.per_step_delta[k - 1] if k else 0.0
        rows.append([k, h, delta, report.per_step_stderr[k], report.mean_disorder_by_step[k]])
    return rows


TRAJECTORY_HEADER = ("step", "entropy_bits", "delta_bits", "stderr_bits", "mean_disorder")


def write_report(report: ExperimentReport, out_dir: str | Path, prefix: str = "") -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{prefix}summary.csv").write_text(_table(SUMMARY_KEYS, [summary_row(report)]))
    (out / f"{prefix}trajectory.csv").write_text(_table(TRAJECTORY_HEADER, trajectory_rows(report)))
    per_run = [[i, m, d] for i, (m, d) in enumerate(
        zip(report.per_run_mev.tolist(), report.per_run_terminal_disorder.tolist()))]
    (out / f"{prefix}runs.csv").write_text(_table(("run", "mev", "terminal_disorder"), per_run))


def read_summary(path: str | Path) -> list[dict[str, Any]]:
    """Parse a summary table written by :func:`write_report` or ``compare``."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = []
    for rec in csv.DictReader(lines):
        parsed: dict[str, Any] = {}
        for k, v in rec.items():
            if k == "strategy":
                parsed[k] = v
            elif k in ("good_mev_count", "bad_mev_count", "seed"):
                parsed[k] = int(v)
            else:
                parsed[k] = float(v)
        rows.append(parsed)
    return rows


def rounded_summary(report: ExperimentReport) -> dict[str, Any]:
    return {k: _rounded(v) for k, v in report.summary().items()}


# ---------------------------------------------------------------- commands


def cmd_entropy(args: argparse.Namespace, out) -> int:
    if args.sweep:
        try:
            start, stop, step = (int(x) for x in args.sweep.split(":"))
        except ValueError:
            raise UsageError("--sweep expects start:stop:step") from None
        if step <= 0 or start < 0:
            raise UsageError("--sweep needs start >= 0 and step > 0")
        ns = list(range(start, stop + 1, step))
    else:
        if args.n is None:
            raise UsageError("entropy needs --n or --sweep")
        ns = [args.n]
    if not (0.0 < args.p < 1.0) or any(n < 0 for n in ns):
        raise UsageError("need n >= 0 and 0 < p < 1")
    rows = []
    for n in ns:
        exact = binomial_entropy_exact(n, args.p)
        if n >= 1:
            asym = binomial_entropy_asymptotic(n, args.p)
            rows.append([n, args.p, exact, asym, abs(exact - asym)])
        else:
            rows.append([n, args.p, exact, "n/a", "n/a"])
    out.write(_table(("n", "p", "exact_bits", "asymptotic_bits", "abs_diff_bits"), rows))
    return 0


def _emit_summaries(reports: list[ExperimentReport], args, out) -> None:
    seed = reports[0].seed
    if args.format == "json":
        payload = [rounded_summary(r) for r in reports]
        out.write(json.dumps(payload[0] if len(payload) == 1 else payload, indent=2) + "\n")
    else:
        out.write(f"# seed: {seed}\n")
        out.write(_table(SUMMARY_KEYS, [summary_row(r) for r in reports]))


def cmd_simulate(args: argparse.Namespace, out) -> int:
    config = resolve_config(args, strategy=args.strategy)
    report = run_experiment(config, workers=args.workers)
    _emit_summaries([report], args, out)
    if args.out:
        write_report(report, args.out)
    return 0


def cmd_compare(args: argparse.Namespace, out) -> int:
    config = resolve_config(args, strategy="baseline")
    names = args.strategies.split(",") if args.strategies else None
    if names:
        bad = [s for s in names if s not in STRATEGY_NAMES]
        if bad:
            raise UsageError(f"unknown strategies: {', '.join(bad)}")
    reports = compare(config, names, workers=args.workers)
    ordered = list(reports.values())
    _emit_summaries(ordered, args, out)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "compare.csv").write_text(
            _table(SUMMARY_KEYS, [summary_row(r) for r in ordered]))
        for name, r in reports.items():
            write_report(r, args.out, prefix=f"{name}.")
    return 0


def _terminal(block) -> int:
    return block.terminal_disorder


def oracle_check(
    trials: int,
    max_mempool: int,
    max_n: int,
    seed: int,
    limit: int = builders.DEFAULT_ORACLE_LIMIT,
    greedy: Callable | None = None,
) -> list[dict[str, Any]]:
    """Compare greedy and exhaustive terminal disorder on random mempools.

    Returns the disagreeing instances (empty when everything matches).
    """
    greedy = greedy or builders.build_min_oracle_greedy
    rng = np.random.default_rng(seed)
    bad = []
    for _ in range(trials):
        m = int(rng.integers(1, max_mempool + 1))
        n = int(rng.integers(1, min(m, max_n) + 1))
        dirs = np.where(rng.random(m) < 0.5, 1, -1)
        pool = Mempool.from_transactions(TraderTrade(int(d), trader(i)) for i, d in enumerate(dirs))
        g = _terminal(greedy(pool, n, ChainState()))
        b = _terminal(builders.build_min_oracle_bruteforce(pool, n, ChainState(), limit=limit))
        if g != b:
            bad.append({"mempool": [int(d) for d in dirs], "n": n, "greedy": g, "bruteforce": b})
    return bad


def cmd_oracle_check(args: argparse.Namespace, out) -> int:
    if args.trials < 1 or args.max_mempool < 1 or args.max_n < 1:
        raise UsageError("trials, --max-mempool and --max-n must be positive")
    if math.comb(args.max_mempool, min(args.max_n, args.max_mempool // 2)) > args.oracle_limit:
        raise UsageError("bounds exceed the combinatorial limit")
    seed = args.seed if args.seed is not None else _fresh_seed()
    bad = oracle_check(args.trials, args.max_mempool, args.max_n, seed, args.oracle_limit)
    out.write(f"# seed: {seed}\n")
    if bad:
        for case in bad:
            out.write(f"counterexample: mempool={case['mempool']} n={case['n']} "
                      f"greedy={case['greedy']} bruteforce={case['bruteforce']}\n")
        out.write(f"FAIL {len(bad)}/{args.trials} trials disagree\n")
        return 1
    out.write(f"OK {args.trials}/{args.trials} trials agree\n")
    return 0


# ---------------------------------------------------------------- entry


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mevdisorder", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    e = sub.add_parser("entropy", help="exact vs asymptotic binomial entropy")
    e.add_argument("--n", type=int)
    e.add_argument("--p", type=float, default=0.5)
    e.add_argument("--sweep", help="start:stop:step over n (inclusive)")
    e.set_defaults(func=cmd_entropy)

    s = sub.add_parser("simulate", help="run one strategy")
    _add_config_flags(s, with_strategy=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="run strategies on common random numbers")
    _add_config_flags(c, with_strategy=False)
    c.add_argument("--strategies", help="comma-separated subset of strategies")
    c.set_defaults(func=cmd_compare)

    o = sub.add_parser("oracle-check", help="greedy vs exhaustive min-entropy oracle")
    o.add_argument("--trials", type=int, default=1000)
    o.add_argument("--max-mempool", type=int, default=12)
    o.add_argument("--max-n", type=int, default=6)
    o.add_argument("--seed", type=int)
    o.add_argument("--oracle-limit", type=int, default=builders.DEFAULT_ORACLE_LIMIT)
    o.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CombinatorialLimitError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
