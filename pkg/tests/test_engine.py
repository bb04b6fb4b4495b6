import math
from dataclasses import replace

import numpy as np
import pytest

from mevdisorder import kernels
from mevdisorder.builders import STRATEGY_NAMES
from mevdisorder.engine import (
    CHUNK,
    ConfigError,
    ExperimentConfig,
    WrongStrategyError,
    _run_chunk,
    compare,
    entropy_growth_check,
    run_experiment,
    run_single,
    sample_directions,
)
from mevdisorder.info_theory import EntropyTrajectory, binomial_entropy_exact
from mevdisorder.market import MevClass, PayoffModel

CONVEX = PayoffModel.from_table({1: 3, 2: 8, 3: 20, 4: 40, 5: 70})


def cfg(**kw):
    base = dict(n=6, mempool_size=14, runs=200, master_seed=123)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("kw", [
    dict(p=0.0), dict(p=1.0), dict(n=0), dict(mempool_size=3), dict(runs=0),
    dict(strategy="lottery"), dict(alpha=0.0), dict(master_seed=-1), dict(blocks_per_run=0),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        cfg(**kw)


def test_run_single_is_deterministic():
    c = cfg(strategy="auction", blocks_per_run=2)
    assert run_single(c, 7) == run_single(c, 7)
    with pytest.raises(ConfigError):
        run_single(c, c.runs)


@pytest.mark.parametrize("strategy", ["baseline", "fcfs", "min-oracle-greedy"])
@pytest.mark.parametrize("blocks", [1, 3])
def test_kernel_path_matches_object_path(strategy, blocks):
    c = cfg(strategy=strategy, blocks_per_run=blocks, runs=60, payoff=CONVEX)
    traj, mev, *_ , terminal = _run_chunk(c, 0, c.runs)
    for i in range(c.runs):
        t = run_single(c, i)
        assert traj[i].tolist() == list(t.imbalance_by_step)
        assert mev[i] == t.total_mev == t.searcher_value
        assert terminal[i] == t.terminal_disorder


def test_bruteforce_and_greedy_paths_agree():
    c = cfg(strategy="min-oracle-bf", n=4, mempool_size=10, runs=150, blocks_per_run=2)
    bf = run_experiment(c)
    gr = run_experiment(replace(c, strategy="min-oracle-greedy"))
    assert np.array_equal(bf.per_run_terminal_disorder, gr.per_run_terminal_disorder)
    assert bf.trajectory == gr.trajectory


def test_report_is_reproducible():
    c = cfg(strategy="fcfs")
    a, b = run_experiment(c), run_experiment(c)
    assert a == b
    assert np.array_equal(a.per_run_mev, b.per_run_mev)


def test_serial_and_parallel_reports_match():
    c = cfg(strategy="min-oracle-greedy", n=10, mempool_size=40, runs=CHUNK + 700)
    serial = run_experiment(c, workers=1)
    parallel = run_experiment(c, workers=2)
    assert serial == parallel
    assert np.array_equal(serial.per_run_terminal_disorder, parallel.per_run_terminal_disorder)


def test_common_random_numbers():
    c = cfg()
    for s in STRATEGY_NAMES:
        assert np.array_equal(sample_directions(replace(c, strategy=s), 5), sample_directions(c, 5))


@pytest.mark.parametrize("payoff", [PayoffModel.linear(1), PayoffModel.linear(4), CONVEX])
def test_fcfs_mev_is_exact_in_every_run(payoff):
    r = run_experiment(cfg(strategy="fcfs", n=10, mempool_size=40, payoff=payoff))
    assert r.mean_block_mev == 5 * payoff(1)
    assert r.block_mev_std == 0.0
    assert r.good_mev_count == 5 * r.config.runs


def test_fcfs_disorder_vanishes_after_even_steps():
    c = cfg(strategy="fcfs", n=10, mempool_size=40)
    for i in range(20):
        imb = run_single(c, i).imbalance_by_step
        assert all(imb[k] == 0 for k in range(1, len(imb), 2))


def test_min_oracle_mev_is_zero_and_residual_reported():
    r = run_experiment(cfg(strategy="min-oracle-greedy", n=4, mempool_size=8, runs=4000))
    assert r.mean_block_mev == 0
    assert r.good_mev_count == 0
    # value left open is payoff(|imbalance|) at block end
    assert r.mean_residual_value == pytest.approx(r.mean_terminal_disorder)


def test_accounting_identity_across_strategies():
    for s in STRATEGY_NAMES:
        r = run_experiment(cfg(strategy=s, blocks_per_run=2, payoff=CONVEX, runs=120))
        assert r.good_mev_value == r.searcher_value
        assert r.bad_mev_count == 0


def test_auction_metadata_and_mev():
    r = run_experiment(cfg(strategy="auction", runs=150))
    assert r.metadata["path"] == "object"
    assert r.metadata["tip"] == 1
    assert r.good_mev_value == r.searcher_value > 0


def test_carry_over_changes_only_the_mempool():
    c = cfg(strategy="min-oracle-greedy", blocks_per_run=3, carry_over=True, runs=80)
    r = run_experiment(c)
    assert r.metadata["path"] == "object"
    fresh = run_experiment(replace(c, carry_over=False))
    # the first block has nothing carried in
    assert all(a == b for a, b in zip(
        [run_single(c, i).imbalance_by_step[:c.n] for i in range(10)],
        [run_single(replace(c, carry_over=False), i).imbalance_by_step[:c.n] for i in range(10)],
    ))
    assert r.mean_block_mev == fresh.mean_block_mev == 0


def test_skewed_traders_walk_upward():
    c = cfg(p=0.999, n=20, mempool_size=20)
    for i in range(30):
        imb = run_single(c, i).imbalance_by_step
        drops = sum(b < a for a, b in zip(imb, imb[1:]))
        assert drops <= 2


def test_trader_only_entropy_tracks_binomial():
    r = run_experiment(cfg(n=10, mempool_size=10, runs=40_000))
    for k in range(11):
        assert abs(r.trajectory.per_step_entropy[k] - binomial_entropy_exact(k, 0.5)) < 0.03
    assert r.trajectory.telescoped() == r.trajectory.final


@pytest.mark.parametrize("p", [0.5, 0.9])
def test_entropy_growth_check_trader_only(p):
    assert entropy_growth_check(run_experiment(cfg(p=p, n=12, mempool_size=12, runs=5000)))


def test_entropy_growth_check_rejects_searchers():
    with pytest.raises(WrongStrategyError):
        entropy_growth_check(run_experiment(cfg(strategy="fcfs")))


def test_entropy_growth_check_detects_a_fall():
    r = run_experiment(cfg(n=10, mempool_size=10, runs=2000))
    h = list(r.trajectory.per_step_entropy)
    h[6] = h[5] - 0.5
    fake = replace(r, trajectory=EntropyTrajectory(tuple(h), tuple(b - a for a, b in zip(h, h[1:]))))
    assert not entropy_growth_check(fake)


def test_compare_skips_oversized_bruteforce():
    c = cfg(n=10, mempool_size=40, runs=50)
    assert "min-oracle-bf" not in compare(c)
    small = cfg(n=3, mempool_size=6, runs=50)
    assert math.comb(6, 3) <= small.oracle_limit
    assert list(compare(small)) == list(STRATEGY_NAMES)


def test_no_bad_mev_from_builtin_strategies():
    for s in STRATEGY_NAMES:
        for i in range(15):
            t = run_single(cfg(strategy=s, n=4, mempool_size=8), i)
            assert all(e.mev_class is MevClass.GOOD_ATOMIC and e.payoff > 0 for e in t.mev_events)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_backend_does_not_change_report():
    c = cfg(strategy="fcfs", runs=500)
    a = _run_chunk(c, 0, c.runs, "python")
    b = _run_chunk(c, 0, c.runs, "cython")
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
