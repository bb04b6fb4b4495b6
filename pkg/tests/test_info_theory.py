import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mevdisorder.info_theory import (
    DiscreteDistribution,
    InvalidDistributionError,
    RaggedEnsembleError,
    binomial_entropy_asymptotic,
    binomial_entropy_exact,
    binomial_imbalance_distribution,
    empirical_distribution,
    entropy,
    entropy_delta,
    entropy_trajectory,
    info_content,
)

# Frozen from a 40-digit mpmath summation of -sum C(n,a) p^(n-a) q^a log2(.)
# (see test_pinned_constants_match_high_precision_oracle).
H_EXACT = {
    (2, 0.5): 1.5,
    (10, 0.5): 2.7064289632273311758,
    (50, 0.5): 3.8689735330246802686,
    (100, 0.5): 4.3690114092230157556,
    (500, 0.5): 5.5299872446775150781,
    (10, 0.3): 2.5666681391575009211,
    (10, 0.9): 1.8436306064892139293,
}


def brute_force_entropy(n, p):
    """Enumerate all 2**n trade sequences and bin them by final imbalance."""
    mass = {}
    for seq in product((1, -1), repeat=n):
        buys = seq.count(1)
        w = p**buys * (1 - p) ** (n - buys)
        s = sum(seq)
        mass[s] = mass.get(s, 0.0) + w
    return -math.fsum(m * math.log2(m) for m in mass.values() if m > 0)


def brute_force_entropy_fast(n, p):
    # popcount over all 2**n bit patterns, for n up to 20
    codes = np.arange(2**n, dtype=np.uint32)
    buys = np.zeros_like(codes)
    for bit in range(n):
        buys += (codes >> bit) & 1
    counts = np.bincount(buys, minlength=n + 1)
    mass = [counts[b] * p**b * (1 - p) ** (n - b) for b in range(n + 1)]
    return -math.fsum(m * math.log2(m) for m in mass if m > 0)


def test_pinned_constants_match_high_precision_oracle():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    for (n, p), pinned in H_EXACT.items():
        P = mp.mpf(str(p))
        Q = 1 - P
        h = mp.mpf(0)
        for a in range(n + 1):
            m = mp.binomial(n, a) * P ** (n - a) * Q**a
            h -= m * mp.log(m, 2)
        assert abs(float(h) - pinned) < 1e-15


@pytest.mark.parametrize("p, bits", [(1.0, 0.0), (0.5, 1.0), (0.25, 2.0)])
def test_info_content_examples(p, bits):
    assert info_content(p) == bits


@pytest.mark.parametrize("p", [0.0, -0.1, 1.5, float("nan")])
def test_info_content_rejects_impossible(p):
    with pytest.raises(ValueError):
        info_content(p)


def test_entropy_examples():
    assert entropy(DiscreteDistribution((0,), (1.0,))) == 0.0
    assert entropy(DiscreteDistribution((-1, 1), (0.5, 0.5))) == 1.0
    assert entropy(DiscreteDistribution((-2, 0, 2), (0.25, 0.5, 0.25))) == 1.5


def test_distribution_validation():
    with pytest.raises(InvalidDistributionError):
        DiscreteDistribution((0, 1), (0.5, 0.6))
    with pytest.raises(InvalidDistributionError):
        DiscreteDistribution((0, 0), (0.5, 0.5))
    with pytest.raises(InvalidDistributionError):
        DiscreteDistribution((0, 1), (1.5, -0.5))


def test_binomial_distribution_examples():
    d = binomial_imbalance_distribution(1, 0.5).as_dict()
    assert d == {1: 0.5, -1: 0.5}
    d = binomial_imbalance_distribution(2, 0.5).as_dict()
    assert d[2] == pytest.approx(0.25, abs=1e-15)
    assert d[0] == pytest.approx(0.5, abs=1e-15)
    assert d[-2] == pytest.approx(0.25, abs=1e-15)
    assert binomial_imbalance_distribution(3, 0.9)[3] == pytest.approx(0.9**3, abs=1e-14)


def test_binomial_distribution_matches_pq_pattern():
    p = 0.3
    q = 1 - p
    d = binomial_imbalance_distribution(2, p)
    assert d[2] == pytest.approx(p * p, abs=1e-15)
    assert d[0] == pytest.approx(2 * p * q, abs=1e-15)
    assert d[-2] == pytest.approx(q * q, abs=1e-15)


def test_binomial_distribution_large_n_is_valid():
    d = binomial_imbalance_distribution(10_000, 0.37)
    assert abs(math.fsum(d.mass) - 1.0) <= 1e-12
    with pytest.raises(ValueError):
        binomial_imbalance_distribution(10_001, 0.5)
    with pytest.raises(ValueError):
        binomial_imbalance_distribution(5, 1.0)


def test_binomial_entropy_exact_examples():
    assert binomial_entropy_exact(0, 0.5) == 0.0
    assert binomial_entropy_exact(2, 0.5) == pytest.approx(1.5, abs=1e-15)
    for (n, p), h in H_EXACT.items():
        assert binomial_entropy_exact(n, p) == pytest.approx(h, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 7, 12])
@pytest.mark.parametrize("p", [0.5, 0.2, 0.93])
def test_binomial_entropy_matches_sequence_enumeration(n, p):
    assert binomial_entropy_exact(n, p) == pytest.approx(brute_force_entropy(n, p), abs=1e-9)


@pytest.mark.parametrize("n", range(0, 21))
def test_binomial_entropy_matches_bit_enumeration_up_to_20(n):
    for p in (0.5, 0.3):
        assert abs(binomial_entropy_exact(n, p) - brute_force_entropy_fast(n, p)) < 1e-9


def test_asymptotic_examples():
    assert binomial_entropy_asymptotic(100, 0.5) == pytest.approx(4.3690236800680034506, abs=1e-12)
    assert round(binomial_entropy_asymptotic(100, 0.5), 3) == 4.369
    assert binomial_entropy_asymptotic(1, 0.5) == 0.5 * math.log2(2 * math.pi * math.e * 0.25)
    assert abs(binomial_entropy_exact(100, 0.5) - binomial_entropy_asymptotic(100, 0.5)) < 0.01
    with pytest.raises(ValueError):
        binomial_entropy_asymptotic(0, 0.5)


def test_asymptotic_gap_decreases():
    gaps = [abs(binomial_entropy_exact(n, 0.5) - binomial_entropy_asymptotic(n, 0.5))
            for n in (10, 50, 100, 500)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("p", [0.5, 0.3, 0.9])
def test_exact_entropy_strictly_increasing(p):
    hs = [binomial_entropy_exact(n, p) for n in range(1, 101)]
    assert all(b > a for a, b in zip(hs, hs[1:]))


def test_empirical_distribution_examples():
    assert empirical_distribution([0, 0, 0, 0]).as_dict() == {0: 1.0}
    d = empirical_distribution([1, -1, 1, -1])
    assert d.support == (-1, 1)
    assert d.mass == (0.5, 0.5)
    with pytest.raises(ValueError):
        empirical_distribution([])


def test_empirical_entropy_converges_to_binomial():
    rng = np.random.default_rng(2024)
    steps = np.where(rng.random((100_000, 10)) < 0.5, 1, -1).sum(axis=1)
    h = entropy(empirical_distribution(steps.tolist()))
    assert abs(h - H_EXACT[(10, 0.5)]) < 0.02


def test_entropy_delta_examples():
    assert entropy_delta(1.5, 1.0) == 0.5
    assert entropy_delta(0.0, 1.0) == -1.0
    assert entropy_delta(0.7, 0.7) == 0.0


def test_trajectory_degenerate():
    t = entropy_trajectory([[0, 0, 0]] * 4)
    assert t.per_step_entropy == (0.0,) * 4
    assert t.per_step_delta == (0.0,) * 3


def test_trajectory_ragged():
    with pytest.raises(RaggedEnsembleError):
        entropy_trajectory([[0, 0], [0]])


def test_trajectory_tracks_binomial_walk():
    rng = np.random.default_rng(7)
    walk = np.cumsum(np.where(rng.random((50_000, 8)) < 0.5, 1, -1), axis=1)
    ens = np.concatenate([np.zeros((50_000, 1), dtype=np.int64), walk], axis=1)
    t = entropy_trajectory(ens)
    for k in range(9):
        assert abs(t.per_step_entropy[k] - binomial_entropy_exact(k, 0.5)) < 0.02


@st.composite
def distributions(draw):
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12))
    if sum(weights) == 0:
        weights[0] = 1.0
    total = math.fsum(weights)
    mass = [w / total for w in weights]
    # repair the sum so it lands inside the validation tolerance
    mass[-1] = max(0.0, 1.0 - math.fsum(mass[:-1]))
    return DiscreteDistribution(tuple(range(len(mass))), tuple(mass))


@given(distributions())
@settings(max_examples=200)
def test_entropy_nonnegative_and_zero_iff_degenerate(d):
    h = entropy(d)
    assert h >= 0.0
    degenerate = sum(m > 0 for m in d.mass) == 1
    assert (h == 0.0) == degenerate


@given(st.floats(1e-9, 1 - 1e-9))
def test_two_outcome_entropy_peaks_at_half(p):
    h = entropy(DiscreteDistribution((0, 1), (p, 1 - p)))
    assert h <= 1.0 + 1e-15


@given(st.lists(st.lists(st.integers(-5, 5), min_size=6, max_size=6), min_size=1, max_size=20))
@settings(max_examples=200)
def test_trajectory_telescopes_exactly(steps):
    # transpose run-major lists into step-major sample lists
    per_step = [list(col) for col in zip(*steps)]
    t = entropy_trajectory(per_step)
    assert t.telescoped() == t.per_step_entropy[-1]
    for k in range(1, len(per_step)):
        assert t.per_step_delta[k - 1] == t.per_step_entropy[k] - t.per_step_entropy[k - 1]
        assert abs(t.per_step_entropy[k] - entropy(empirical_distribution(per_step[k]))) < 1e-11
