"""Discrete information-theory primitives, all in bits.

Surprisal, Shannon entropy, the binomial law of the pool imbalance and
plug-in estimation from Monte Carlo ensembles.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MASS_TOL = 1e-12
DEFAULT_MAX_N = 10_000

# Trajectory entropies are snapped to this dyadic grid so that the
# telescoping sum of deltas reproduces the final entropy bit for bit.
_GRID = 2.0 ** -40


class InvalidDistributionError(ValueError):
    pass


class RaggedEnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probability mass over distinct integer outcomes."""

    support: tuple[int, ...]
    mass: tuple[float, ...]

    def __post_init__(self) -> None:
        support = tuple(int(v) for v in self.support)
        mass = tuple(float(m) for m in self.mass)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)
        if len(support) != len(mass):
            raise InvalidDistributionError("support and mass differ in length")
        if not support:
            raise InvalidDistributionError("empty distribution")
        if len(set(support)) != len(support):
            raise InvalidDistributionError("support entries must be distinct")
        if any(m < 0.0 or m > 1.0 or math.isnan(m) for m in mass):
            raise InvalidDistributionError("masses must lie in [0, 1]")
        total = math.fsum(mass)
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidDistributionError(f"masses sum to {total!r}, not 1")

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.support, self.mass))

    def __getitem__(self, outcome: int) -> float:
        return self.as_dict().get(outcome, 0.0)


@dataclass(frozen=True)
class EntropyTrajectory:
    per_step_entropy: tuple[float, ...]
    per_step_delta: tuple[float, ...]

    @property
    def final(self) -> float:
        return self.per_step_entropy[-1]

    def telescoped(self) -> float:
        """Initial entropy plus every increment, summed left to right."""
        total = self.per_step_entropy[0]
        for d in self.per_step_delta:
            total += d
        return total


def info_content(p: float) -> float:
    """Surprisal ``-log2(p)`` of an event with probability `p`."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"information content undefined for probability {p!r}")
    if p == 1.0:
        return 0.0
    return -math.log2(p)


def _plugin_entropy(masses: Iterable[float]) -> float:
    h = math.fsum(-m * math.log2(m) for m in masses if m > 0.0)
    # -0.0 and tiny negative rounding are reported as exact zero
    return h if h > 0.0 else 0.0


def entropy(d: DiscreteDistribution) -> float:
    """Shannon entropy with the ``0 log 0 = 0`` convention."""
    return _plugin_entropy(d.mass)


def binomial_imbalance_distribution(
    n: int, p: float, max_n: int = DEFAULT_MAX_N
) -> DiscreteDistribution:
    """Law of the imbalance after `n` independent unit trades.

    Each trade buys (+1) with probability `p` and sells (-1) otherwise, so
    the imbalance is ``n - 2a`` with ``a`` sells. Masses are evaluated in
    log space and support is listed from ``+n`` down to ``-n``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > max_n:
        raise ValueError(f"n={n} exceeds the configured maximum {max_n}")
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    log_p, log_q = math.log(p), math.log1p(-p)
    lg_n1 = math.lgamma(n + 1)
    logs = [
        lg_n1 - math.lgamma(a + 1) - math.lgamma(n - a + 1) + (n - a) * log_p + a * log_q
        for a in range(n + 1)
    ]
    top = max(logs)
    weights = [math.exp(v - top) for v in logs]
    # lgamma carries ~1e-16 relative error per term, which at large n breaks
    # the 1e-12 mass-sum tolerance; renormalising removes the drift
    z = math.fsum(weights)
    mass = tuple(w / z for w in weights)
    return DiscreteDistribution(tuple(n - 2 * a for a in range(n + 1)), mass)


def binomial_entropy_exact(n: int, p: float) -> float:
    return entropy(binomial_imbalance_distribution(n, p))


def binomial_entropy_asymptotic(n: int, p: float) -> float:
    """Large-n (Gaussian) approximation ``0.5 log2(2 pi e n p q)``."""
    if n < 1:
        raise ValueError("asymptotic entropy needs n >= 1")
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    return 0.5 * math.log2(2.0 * math.pi * math.e * n * p * (1.0 - p))


def empirical_distribution(samples: Sequence[int]) -> DiscreteDistribution:
    if len(samples) == 0:
        raise ValueError("cannot estimate a distribution from zero samples")
    counts = Counter(int(s) for s in samples)
    total = len(samples)
    support = tuple(sorted(counts))
    return DiscreteDistribution(support, tuple(counts[v] / total for v in support))


def entropy_delta(h_after: float, h_before: float) -> float:
    return h_after - h_before


def _column_stats(column: np.ndarray) -> tuple[float, float]:
    """Plug-in entropy of one ensemble column and its delta-method standard error."""
    _, counts = np.unique(column, return_counts=True)
    r = column.shape[0]
    probs = counts / r
    surprisal = -np.log2(probs)
    h = float(math.fsum(probs * surprisal))
    second = float(math.fsum(probs * surprisal**2))
    var = max(second - h * h, 0.0)
    return max(h, 0.0), math.sqrt(var / r)


def _snap(h: float) -> float:
    return round(h / _GRID) * _GRID


def entropy_trajectory(per_step_samples) -> EntropyTrajectory:
    """Ensemble entropy after each transaction slot.

    `per_step_samples` is either a sequence of equal-length sample lists
    (one per step k = 0..n) or a 2-D array of shape ``(runs, steps)``.
    """
    return entropy_trajectory_with_stderr(per_step_samples)[0]


def entropy_trajectory_with_stderr(per_step_samples) -> tuple[EntropyTrajectory, tuple[float, ...]]:
    if isinstance(per_step_samples, np.ndarray):
        if per_step_samples.ndim != 2:
            raise RaggedEnsembleError("expected a (runs, steps) array")
        columns = [per_step_samples[:, k] for k in range(per_step_samples.shape[1])]
    else:
        lengths = {len(s) for s in per_step_samples}
        if len(lengths) > 1:
            raise RaggedEnsembleError(f"sample lists differ in length: {sorted(lengths)}")
        columns = [np.asarray(s, dtype=np.int64) for s in per_step_samples]
    if not columns:
        raise ValueError("trajectory needs at least the initial step")
    if columns[0].shape[0] == 0:
        raise ValueError("cannot estimate entropy from zero samples")
    hs, ses = [], []
    for col in columns:
        h, se = _column_stats(col)
        hs.append(_snap(h))
        ses.append(se)
    deltas = tuple(entropy_delta(hs[k], hs[k - 1]) for k in range(1, len(hs)))
    return EntropyTrajectory(tuple(hs), deltas), tuple(ses)
