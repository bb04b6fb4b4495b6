"""Two-pool market: chain state, trades, arbitrage and MEV classification.

The state keeps only the signed difference between the pools (the
imbalance) plus player balances. Traders move the imbalance by one unit;
a searcher arbitrage closes it completely and is paid by a payoff model.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, NamedTuple, Union

import numpy as np


class Role(enum.Enum):
    TRADER = "trader"
    SEARCHER = "searcher"
    BUILDER = "builder"


class PlayerId(NamedTuple):
    role: Role
    index: int

    def __str__(self) -> str:
        return f"{self.role.value}:{self.index}"


def trader(index: int) -> PlayerId:
    return PlayerId(Role.TRADER, index)


def searcher(index: int) -> PlayerId:
    return PlayerId(Role.SEARCHER, index)


def builder(index: int = 0) -> PlayerId:
    return PlayerId(Role.BUILDER, index)


class RoleError(ValueError):
    pass


class UnknownPlayerError(KeyError):
    pass


@dataclass(frozen=True)
class TraderTrade:
    direction: int
    trader: PlayerId

    def __post_init__(self) -> None:
        if self.direction not in (1, -1):
            raise ValueError(f"trade direction must be +1 or -1, got {self.direction!r}")
        if self.trader.role is not Role.TRADER:
            raise RoleError(f"{self.trader} cannot submit a trader trade")

    @property
    def actor(self) -> PlayerId:
        return self.trader


@dataclass(frozen=True)
class SearcherArb:
    searcher: PlayerId

    def __post_init__(self) -> None:
        if self.searcher.role is not Role.SEARCHER:
            raise RoleError(f"{self.searcher} cannot submit an arbitrage")

    @property
    def actor(self) -> PlayerId:
        return self.searcher


Transaction = Union[TraderTrade, SearcherArb]


class MevClass(enum.Enum):
    GOOD_ATOMIC = "good"
    BAD_ATOMIC = "bad"
    NOT_MEV = "none"


@dataclass(frozen=True)
class PayoffModel:
    """Value a searcher earns for closing an imbalance of size k.

    ``linear`` pays ``k * unit_value``; ``table`` looks the magnitude up in
    `table` (keys 1..K, strictly increasing values). ``payoff(0)`` is 0.
    """

    kind: str = "linear"
    unit_value: int = 1
    table: Mapping[int, int] | tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "table"):
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.unit_value <= 0:
            raise ValueError("unit_value must be positive")
        if self.kind == "table":
            if not self.table:
                raise ValueError("table payoff needs a table")
            if not isinstance(self.table, Mapping):
                object.__setattr__(self, "table", dict(self.table))
            keys = sorted(self.table)
            if keys != list(range(1, len(keys) + 1)):
                raise ValueError("payoff table keys must be 1..K without gaps")
            values = [0] + [int(self.table[k]) for k in keys]
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ValueError("payoff table must be strictly increasing from payoff(0)=0")
            # stored as sorted pairs so the model stays hashable and picklable
            object.__setattr__(self, "table", tuple((k, int(self.table[k])) for k in keys))

    @classmethod
    def linear(cls, unit_value: int = 1) -> "PayoffModel":
        return cls("linear", unit_value)

    @classmethod
    def from_table(cls, table: Mapping[int, int]) -> "PayoffModel":
        return cls("table", 1, table)

    def __call__(self, k: int) -> int:
        k = abs(k)
        if k == 0:
            return 0
        if self.kind == "linear":
            return k * self.unit_value
        if k > len(self.table):
            raise ValueError(f"payoff table does not cover an imbalance of {k}")
        return self.table[k - 1][1]

    def values(self, upto: int) -> np.ndarray:
        """Payoffs for magnitudes 0..upto; table entries past the end read as -1."""
        out = np.full(upto + 1, -1, dtype=np.int64)
        out[0] = 0
        for k in range(1, upto + 1):
            if self.kind == "linear" or k <= len(self.table):
                out[k] = self(k)
        return out


@dataclass(frozen=True)
class ChainState:
    imbalance: int = 0
    balances: Mapping[PlayerId, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "balances", MappingProxyType(dict(self.balances)))

    def balance(self, player: PlayerId) -> int:
        try:
            return self.balances[player]
        except KeyError:
            raise UnknownPlayerError(player) from None

    def with_players(self, players: Iterable[PlayerId]) -> "ChainState":
        merged = dict(self.balances)
        for p in players:
            merged.setdefault(p, 0)
        return ChainState(self.imbalance, merged)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChainState):
            return NotImplemented
        return self.imbalance == other.imbalance and dict(self.balances) == dict(other.balances)

    def __hash__(self) -> int:
        return hash((self.imbalance, frozenset(self.balances.items())))


EQUILIBRIUM = ChainState()


def disorder(state: ChainState) -> int:
    """Per-state disorder proxy: units away from equilibrium."""
    return abs(state.imbalance)


def searcher_would_act(state: ChainState) -> bool:
    return disorder(state) > 0


def sample_trader_tx(p: float, rng: np.random.Generator, trader_id: PlayerId) -> TraderTrade:
    """Draw one Bernoulli trade: buy with probability `p`, else sell."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must lie strictly between 0 and 1")
    if trader_id.role is not Role.TRADER:
        raise RoleError(f"{trader_id} is not a trader")
    return TraderTrade(1 if rng.random() < p else -1, trader_id)


def apply_tx(state: ChainState, tx: Transaction, payoff: PayoffModel) -> ChainState:
    balances = dict(state.balances)
    if isinstance(tx, TraderTrade):
        # bookkeeping only: the trader receives (or gives up) one token unit
        balances[tx.trader] = balances.get(tx.trader, 0) + tx.direction
        return ChainState(state.imbalance + tx.direction, balances)
    if isinstance(tx, SearcherArb):
        balances.setdefault(tx.searcher, 0)
        if state.imbalance == 0:
            return ChainState(0, balances)
        balances[tx.searcher] += payoff(state.imbalance)
        return ChainState(0, balances)
    raise TypeError(f"not a transaction: {tx!r}")


def apply_sequence(state: ChainState, txs: Iterable[Transaction], payoff: PayoffModel) -> ChainState:
    for tx in txs:
        state = apply_tx(state, tx, payoff)
    return state


def realized_extracted_value(before: ChainState, after: ChainState, player: PlayerId) -> int:
    if player not in before.balances and player not in after.balances:
        raise UnknownPlayerError(player)
    return after.balances.get(player, 0) - before.balances.get(player, 0)


def classify_mev(before: ChainState, after: ChainState, actor: PlayerId) -> MevClass:
    """Classify one atomic transaction by how it moves disorder and the actor's balance.

    Good: disorder falls and the actor extracts value. Bad: the actor
    extracts value while disorder rises. Trader balance changes are swap
    bookkeeping and never count as extraction.
    """
    value = realized_extracted_value(before, after, actor)
    if actor.role is Role.TRADER:
        value = 0
    if value <= 0:
        return MevClass.NOT_MEV
    d0, d1 = disorder(before), disorder(after)
    if d1 < d0:
        return MevClass.GOOD_ATOMIC
    if d1 > d0:
        return MevClass.BAD_ATOMIC
    return MevClass.NOT_MEV
