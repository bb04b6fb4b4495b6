"""Ensemble Monte Carlo driver.

Run ``i`` of an experiment draws all of its randomness from
``np.random.default_rng([master_seed, i])``, so a run is reproducible on
its own and every strategy sees the same trader flow for the same run
index (common random numbers). Strategies with a compiled kernel are
simulated in batches; the rest go through the object-level builders.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np

from . import kernels
from .builders import (
    DEFAULT_ORACLE_LIMIT,
    STRATEGY_NAMES,
    Block,
    Bundle,
    Mempool,
    MempoolEntry,
    build_auction,
    build_baseline,
    build_fcfs,
    build_min_oracle_bruteforce,
    build_min_oracle_greedy,
    tip_for,
)
from .info_theory import EntropyTrajectory, entropy_trajectory_with_stderr
from .market import (
    ChainState,
    MevClass,
    PayoffModel,
    PlayerId,
    Role,
    SearcherArb,
    apply_tx,
    classify_mev,
    sample_trader_tx,
    searcher,
    trader,
)

CHUNK = 4096
_KERNEL_CODES = {
    "baseline": kernels.BASELINE,
    "fcfs": kernels.FCFS,
    "min-oracle-greedy": kernels.MIN_ORACLE,
}


class ConfigError(ValueError):
    pass


class WrongStrategyError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    p: float = 0.5
    n: int = 10
    blocks_per_run: int = 1
    mempool_size: int = 40
    runs: int = 1000
    strategy: str = "baseline"
    payoff: PayoffModel = field(default_factory=PayoffModel)
    alpha: float = 0.9
    master_seed: int = 0
    oracle_limit: int = DEFAULT_ORACLE_LIMIT
    carry_over: bool = False
    bundle_as_one_slot: bool = False

    def __post_init__(self) -> None:
        if not (0.0 < self.p < 1.0):
            raise ConfigError("p must lie strictly between 0 and 1")
        if self.n < 1:
            raise ConfigError("block size n must be at least 1")
        if self.mempool_size < self.n:
            raise ConfigError("mempool_size must be at least n")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.blocks_per_run < 1:
            raise ConfigError("blocks_per_run must be at least 1")
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; choose from {STRATEGY_NAMES}")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError("alpha must lie in (0, 1]")
        if not (0 <= self.master_seed < 2**64):
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.oracle_limit < 1:
            raise ConfigError("oracle_limit must be positive")

    @property
    def steps(self) -> int:
        return self.blocks_per_run * self.n

    def echo(self) -> dict[str, Any]:
        d = asdict(self)
        d["payoff"] = {"kind": self.payoff.kind, "unit_value": self.payoff.unit_value,
                       "table": dict(self.payoff.table) if self.payoff.table else None}
        return d


@dataclass(frozen=True)
class MevEvent:
    step: int
    mev_class: MevClass
    payoff: int


@dataclass(frozen=True)
class RunTrace:
    imbalance_by_step: tuple[int, ...]
    mev_events: tuple[MevEvent, ...]
    final_balances: dict[PlayerId, int]
    blocks: tuple[Block, ...] = ()

    @property
    def total_mev(self) -> int:
        return sum(e.payoff for e in self.mev_events if e.mev_class is MevClass.GOOD_ATOMIC)

    @property
    def terminal_disorder(self) -> int:
        return abs(self.imbalance_by_step[-1])

    @property
    def searcher_value(self) -> int:
        return sum(v for p, v in self.final_balances.items() if p.role is Role.SEARCHER)


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    trajectory: EntropyTrajectory
    per_step_stderr: tuple[float, ...]
    mean_disorder_by_step: tuple[float, ...]
    mean_block_mev: float
    block_mev_std: float
    mean_terminal_disorder: float
    mean_residual_value: float
    good_mev_count: int
    bad_mev_count: int
    good_mev_value: int
    searcher_value: int
    metadata: dict[str, Any]
    per_run_mev: np.ndarray = field(repr=False, compare=False)
    per_run_terminal_disorder: np.ndarray = field(repr=False, compare=False)
    per_run_residual_value: np.ndarray = field(repr=False, compare=False)

    @property
    def seed(self) -> int:
        return self.config.master_seed

    @property
    def entropy_final_bits(self) -> float:
        return self.trajectory.final

    def summary(self) -> dict[str, Any]:
        return {
            "strategy": self.config.strategy,
            "mean_block_mev": self.mean_block_mev,
            "mean_terminal_disorder": self.mean_terminal_disorder,
            "entropy_final_bits": self.entropy_final_bits,
            "good_mev_count": self.good_mev_count,
            "bad_mev_count": self.bad_mev_count,
            "seed": self.seed,
        }


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, run_index])


def sample_directions(config: ExperimentConfig, run_index: int) -> np.ndarray:
    """Trader directions for one run, shape ``(blocks_per_run, mempool_size)``."""
    u = run_rng(config.master_seed, run_index).random((config.blocks_per_run, config.mempool_size))
    return np.where(u < config.p, 1, -1).astype(np.int8)


def _auction_mempool(trades, config: ExperimentConfig, block_index: int) -> Mempool:
    entries = [MempoolEntry(tx, i) for i, tx in enumerate(trades)]
    # one single-arb bundle per slot; searchers expect to close a one-unit move
    tip = tip_for(config.alpha, config.payoff(1))
    base = len(entries)
    for j in range(config.n):
        who = searcher(j)
        entries.append(MempoolEntry(Bundle((SearcherArb(who),), who), base + j, tip))
    return Mempool(tuple(entries))


def _build(config: ExperimentConfig, trades, state: ChainState, block_index: int) -> Block:
    s = config.strategy
    if s == "baseline":
        return build_baseline(trades, config.n, state, config.payoff)
    if s == "fcfs":
        return build_fcfs(trades, config.n, state, config.payoff)
    if s == "min-oracle-greedy":
        return build_min_oracle_greedy(Mempool.from_transactions(trades), config.n, state, config.payoff)
    if s == "min-oracle-bf":
        return build_min_oracle_bruteforce(
            Mempool.from_transactions(trades), config.n, state, config.payoff, config.oracle_limit
        )
    return build_auction(
        _auction_mempool(trades, config, block_index), config.n, state, config.payoff,
        bundle_as_one_slot=config.bundle_as_one_slot,
    )


def _used(block: Block) -> set[int]:
    return {id(tx) for tx in block.transactions}


def run_single(config: ExperimentConfig, run_index: int, keep_blocks: bool = False) -> RunTrace:
    """One realisation through the object-level builders."""
    if not (0 <= run_index < config.runs):
        raise ConfigError(f"run_index {run_index} outside 0..{config.runs - 1}")
    rng = run_rng(config.master_seed, run_index)
    state = ChainState()
    imbalances: list[int] = []
    events: list[MevEvent] = []
    blocks: list[Block] = []
    leftovers: list = []
    for b in range(config.blocks_per_run):
        fresh = [
            sample_trader_tx(config.p, rng, trader(b * config.mempool_size + j))
            for j in range(config.mempool_size)
        ]
        trades = leftovers + fresh if config.carry_over else fresh
        block = _build(config, trades, state, b)
        offset = len(imbalances)
        for k, (rec, imb) in enumerate(zip(block.records, block.imbalances)):
            if rec.mev_class is not MevClass.NOT_MEV:
                events.append(MevEvent(offset + k, rec.mev_class, rec.payoff))
        imbalances.extend(block.imbalances)
        state = block.final_state
        if config.carry_over:
            used = _used(block)
            leftovers = [tx for tx in trades if id(tx) not in used]
        if keep_blocks:
            blocks.append(block)
    return RunTrace(tuple(imbalances), tuple(events), dict(state.balances), tuple(blocks))


def _payoff_table(config: ExperimentConfig) -> np.ndarray:
    # FCFS arbitrages only ever close a single unit
    return config.payoff.values(2)


def residual_value(config: ExperimentConfig, traj: np.ndarray) -> np.ndarray:
    """Per-run sum over blocks of the good MEV left open at block end.

    NaN where the payoff table does not cover the residual imbalance.
    """
    ends = np.abs(traj[:, config.n - 1 :: config.n])
    table = config.payoff.values(int(ends.max(initial=0))).astype(float)
    table[table < 0] = np.nan
    return table[ends].sum(axis=1)


def _kernel_eligible(config: ExperimentConfig) -> bool:
    return config.strategy in _KERNEL_CODES and not config.carry_over


def _run_chunk(config: ExperimentConfig, start: int, stop: int, backend: str | None = None):
    """Simulate runs ``start..stop-1``; returns imbalance matrix and per-run stats."""
    if _kernel_eligible(config):
        mod = kernels.get_backend(backend) if backend else kernels
        dirs = np.stack([sample_directions(config, i) for i in range(start, stop)])
        traj, mev, arbs, terminal = mod.simulate_batch(
            dirs, config.n, _KERNEL_CODES[config.strategy], _payoff_table(config)
        )
        bad = np.zeros_like(arbs)
        return traj, mev, arbs, bad, mev.copy(), terminal
    count = stop - start
    traj = np.zeros((count, config.steps), dtype=np.int64)
    mev = np.zeros(count, dtype=np.int64)
    good = np.zeros(count, dtype=np.int64)
    bad = np.zeros(count, dtype=np.int64)
    value = np.zeros(count, dtype=np.int64)
    terminal = np.zeros(count, dtype=np.int64)
    for row, i in enumerate(range(start, stop)):
        t = run_single(config, i)
        traj[row] = t.imbalance_by_step
        mev[row] = t.total_mev
        good[row] = sum(e.mev_class is MevClass.GOOD_ATOMIC for e in t.mev_events)
        bad[row] = sum(e.mev_class is MevClass.BAD_ATOMIC for e in t.mev_events)
        value[row] = t.searcher_value
        terminal[row] = t.terminal_disorder
    return traj, mev, good, bad, value, terminal


def _chunk_call(args):
    return _run_chunk(*args)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """Run every realisation and aggregate.

    The output does not depend on `workers`: runs are split into fixed
    chunks and merged in run-index order.
    """
    bounds = [(s, min(s + CHUNK, config.runs)) for s in range(0, config.runs, CHUNK)]
    backend = kernels.backend_name()
    jobs = [(config, s, e, backend) for s, e in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_call, jobs))
    else:
        parts = [_chunk_call(j) for j in jobs]
    traj, mev, good, bad, value, terminal = (np.concatenate(x) for x in zip(*parts))

    ensemble = np.concatenate([np.zeros((config.runs, 1), dtype=np.int64), traj], axis=1)
    trajectory, stderr = entropy_trajectory_with_stderr(ensemble)
    residual = residual_value(config, traj)
    per_block = mev / config.blocks_per_run
    meta = {
        "kernel_backend": backend,
        "path": "kernel" if _kernel_eligible(config) else "object",
        "searchers": config.strategy != "baseline",
    }
    if config.strategy == "auction":
        meta["tip"] = tip_for(config.alpha, config.payoff(1))
    return ExperimentReport(
        config=config,
        trajectory=trajectory,
        per_step_stderr=stderr,
        mean_disorder_by_step=tuple(float(x) for x in np.abs(ensemble).mean(axis=0)),
        mean_block_mev=float(mev.sum()) / (config.runs * config.blocks_per_run),
        block_mev_std=float(per_block.std()),
        mean_terminal_disorder=float(terminal.sum()) / config.runs,
        mean_residual_value=float(residual.sum()) / (config.runs * config.blocks_per_run),
        good_mev_count=int(good.sum()),
        bad_mev_count=int(bad.sum()),
        good_mev_value=int(mev.sum()),
        searcher_value=int(value.sum()),
        metadata=meta,
        per_run_mev=mev,
        per_run_terminal_disorder=terminal,
        per_run_residual_value=residual,
    )


def entropy_growth_check(report: ExperimentReport, n_se: float = 2.0) -> bool:
    """True if ensemble entropy never falls by more than `n_se` standard errors per step."""
    if report.config.strategy != "baseline" or report.good_mev_count or report.bad_mev_count:
        raise WrongStrategyError("entropy growth is only defined for searcher-free experiments")
    h = report.trajectory.per_step_entropy
    se = report.per_step_stderr
    for k in range(1, len(h)):
        slack = n_se * math.hypot(se[k], se[k - 1])
        if h[k] < h[k - 1] - slack:
            return False
    return True


def compare(config: ExperimentConfig, strategies=None, workers: int = 1) -> dict[str, ExperimentReport]:
    """Run several strategies on identical trader randomness."""
    if strategies is None:
        strategies = [s for s in STRATEGY_NAMES if s != "min-oracle-bf" or
                      math.comb(config.mempool_size, config.n) <= config.oracle_limit]
    return {s: run_experiment(replace(config, strategy=s), workers=workers) for s in strategies}
