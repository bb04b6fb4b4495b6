"""Block builders: min-entropy oracle (exhaustive and greedy), FCFS, tip auction.

Every builder is a pure function of its inputs. It executes the block
against a private copy of the state and returns the ordered transactions
together with one record per executed transaction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from . import kernels
from .market import (
    ChainState,
    MevClass,
    PayoffModel,
    PlayerId,
    SearcherArb,
    TraderTrade,
    Transaction,
    apply_tx,
    builder,
    classify_mev,
    disorder,
    searcher,
)

DEFAULT_ORACLE_LIMIT = 5_000_000
_UNIT = PayoffModel.linear(1)


class CombinatorialLimitError(RuntimeError):
    """Exhaustive search would visit more subsets than allowed."""


class StreamExhaustedError(RuntimeError):
    pass


class UnderfilledBlockError(RuntimeError):
    pass


@dataclass(frozen=True)
class Bundle:
    transactions: tuple[Transaction, ...]
    submitter: PlayerId

    def __post_init__(self) -> None:
        object.__setattr__(self, "transactions", tuple(self.transactions))
        if not self.transactions:
            raise ValueError("a bundle needs at least one transaction")


@dataclass(frozen=True)
class MempoolEntry:
    payload: Union[Transaction, Bundle]
    arrival_index: int
    tip: int = 0

    def __post_init__(self) -> None:
        if self.tip < 0:
            raise ValueError("tips are nonnegative")

    @property
    def transactions(self) -> tuple[Transaction, ...]:
        if isinstance(self.payload, Bundle):
            return self.payload.transactions
        return (self.payload,)

    @property
    def is_bundle(self) -> bool:
        return isinstance(self.payload, Bundle)


@dataclass(frozen=True)
class Mempool:
    entries: tuple[MempoolEntry, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = [e.arrival_index for e in self.entries]
        if len(set(seen)) != len(seen):
            raise ValueError("arrival indices must be unique")

    @classmethod
    def from_transactions(cls, txs: Iterable[Transaction]) -> "Mempool":
        return cls(tuple(MempoolEntry(tx, i) for i, tx in enumerate(txs)))

    @property
    def capacity(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[MempoolEntry]:
        return iter(self.entries)


@dataclass(frozen=True)
class TxRecord:
    mev_class: MevClass
    payoff: int
    disorder_before: int
    disorder_after: int


@dataclass(frozen=True)
class Block:
    transactions: tuple[Transaction, ...]
    records: tuple[TxRecord, ...]
    builder: PlayerId
    initial_state: ChainState
    final_state: ChainState
    bundle_tips: tuple[int, ...] = ()
    slots: int = field(default=-1)

    @property
    def mev(self) -> int:
        """Good-MEV value captured inside the block."""
        return sum(r.payoff for r in self.records if r.mev_class is MevClass.GOOD_ATOMIC)

    @property
    def terminal_disorder(self) -> int:
        return disorder(self.final_state)

    @property
    def max_intermediate_disorder(self) -> int:
        return max([disorder(self.initial_state)] + [r.disorder_after for r in self.records])

    @property
    def imbalances(self) -> list[int]:
        """Imbalance after each executed transaction."""
        out, s = [], self.initial_state.imbalance
        for tx in self.transactions:
            if isinstance(tx, TraderTrade):
                s += tx.direction
            else:
                s = 0
            out.append(s)
        return out


def _execute(
    txs: Sequence[Transaction], state: ChainState, payoff: PayoffModel
) -> tuple[ChainState, list[TxRecord]]:
    records = []
    for tx in txs:
        before = state.with_players([tx.actor])
        after = apply_tx(before, tx, payoff)
        value = after.balance(tx.actor) - before.balance(tx.actor)
        cls = classify_mev(before, after, tx.actor)
        records.append(
            TxRecord(cls, value if isinstance(tx, SearcherArb) else 0, disorder(before), disorder(after))
        )
        state = after
    return state, records


def _make_block(txs, state, payoff, builder_id, tips=(), slots=None) -> Block:
    final, records = _execute(txs, state, payoff)
    return Block(
        tuple(txs), tuple(records), builder_id, state, final, tuple(tips),
        len(txs) if slots is None else slots,
    )


def _trader_directions(mempool: Mempool) -> np.ndarray:
    dirs = []
    for e in mempool.entries:
        if not isinstance(e.payload, TraderTrade):
            raise TypeError("the min-entropy oracle only accepts plain trader trades")
        dirs.append(e.payload.direction)
    return np.asarray(dirs, dtype=np.int8)


def _arrival_sorted(mempool: Mempool) -> list[MempoolEntry]:
    return sorted(mempool.entries, key=lambda e: e.arrival_index)


def _oracle_block(entries, dirs, chosen, n, state, payoff, builder_id) -> Block:
    order = kernels.order_for_min_disorder(dirs, chosen, state.imbalance)
    txs = [entries[i].payload for i in order]
    return _make_block(txs, state, payoff or _UNIT, builder_id)


def build_min_oracle_bruteforce(
    mempool: Mempool,
    n: int,
    state: ChainState,
    payoff: PayoffModel | None = None,
    limit: int = DEFAULT_ORACLE_LIMIT,
    builder_id: PlayerId = builder(0),
) -> Block:
    """Search every n-subset for the smallest terminal imbalance.

    Ties go to the lexicographically smallest arrival-index set. Raises
    :class:`CombinatorialLimitError` when ``C(M, n)`` exceeds `limit`.
    """
    if n > len(mempool):
        raise ValueError("mempool smaller than block")
    count = math.comb(len(mempool), n)
    if count > limit:
        raise CombinatorialLimitError(
            f"C({len(mempool)}, {n}) = {count} subsets exceeds the limit {limit}; "
            "use the greedy oracle"
        )
    entries = _arrival_sorted(mempool)
    dirs = _trader_directions(Mempool(tuple(entries)))
    chosen = kernels.bruteforce_select(dirs, n, state.imbalance)
    return _oracle_block(entries, dirs, chosen, n, state, payoff, builder_id)


def build_min_oracle_greedy(
    mempool: Mempool,
    n: int,
    state: ChainState,
    payoff: PayoffModel | None = None,
    builder_id: PlayerId = builder(0),
) -> Block:
    """Coincidence-of-wants matching: pair earliest buys with earliest sells.

    Takes just enough of the majority side to cancel the starting
    imbalance, then fills with pairs, then with the surplus side.
    """
    if n > len(mempool):
        raise ValueError("mempool smaller than block")
    entries = _arrival_sorted(mempool)
    dirs = _trader_directions(Mempool(tuple(entries)))
    chosen = kernels.greedy_select(dirs, n, state.imbalance)
    return _oracle_block(entries, dirs, chosen, n, state, payoff, builder_id)


def build_fcfs(
    trade_stream: Iterable[TraderTrade],
    n: int,
    state: ChainState,
    payoff: PayoffModel,
    searcher_id: PlayerId = searcher(0),
    builder_id: PlayerId = builder(0),
) -> Block:
    """Arrival-order block with a spamming searcher.

    Whenever the pool is out of equilibrium the searcher's arbitrage wins
    the next slot; otherwise the next trade in the stream is included.
    """
    stream = iter(trade_stream)
    txs: list[Transaction] = []
    s = state.imbalance
    for _ in range(n):
        if s != 0:
            txs.append(SearcherArb(searcher_id))
            s = 0
            continue
        try:
            tx = next(stream)
        except StopIteration:
            raise StreamExhaustedError("trade stream ran out before the block filled") from None
        txs.append(tx)
        s += tx.direction
    return _make_block(txs, state, payoff, builder_id)


def build_baseline(
    trade_stream: Iterable[TraderTrade],
    n: int,
    state: ChainState,
    payoff: PayoffModel | None = None,
    builder_id: PlayerId = builder(0),
) -> Block:
    """Searcher-free block: the first n trades in arrival order."""
    txs = []
    for tx in trade_stream:
        if len(txs) == n:
            break
        txs.append(tx)
    if len(txs) < n:
        raise StreamExhaustedError("trade stream ran out before the block filled")
    return _make_block(txs, state, payoff or _UNIT, builder_id)


def tip_for(alpha: float, expected_profit: int) -> int:
    """Bid ``alpha * profit`` rounded half up to a whole unit."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    return int(math.floor(alpha * expected_profit + 0.5))


def _reverts(txs: Sequence[Transaction], state: ChainState) -> bool:
    s = state.imbalance
    for tx in txs:
        if isinstance(tx, SearcherArb):
            if s == 0:
                return True
            s = 0
        else:
            s += tx.direction
    return False


def build_auction(
    mempool: Mempool,
    n: int,
    state: ChainState,
    payoff: PayoffModel,
    bundle_as_one_slot: bool = False,
    builder_id: PlayerId = builder(0),
) -> Block:
    """Closed-bid tip auction.

    Entries are ranked by tip (ties by arrival). Each slot goes to the
    best-ranked entry that fits and would not revert against the running
    state. A bundle outranked by one that already executed is dropped, so
    executed bundle tips never increase.
    """
    ranked = sorted(mempool.entries, key=lambda e: (-e.tip, e.arrival_index))
    pending = list(ranked)
    txs: list[Transaction] = []
    tips: list[int] = []
    filled = 0
    ceiling = math.inf
    running = state
    while filled < n:
        pick = None
        for e in pending:
            if e.is_bundle and e.tip > ceiling:
                continue
            size = 1 if (bundle_as_one_slot and e.is_bundle) else len(e.transactions)
            if filled + size > n:
                continue
            if _reverts(e.transactions, running):
                continue
            pick = e
            break
        if pick is None:
            raise UnderfilledBlockError(f"only {filled} of {n} slots could be filled")
        pending.remove(pick)
        for tx in pick.transactions:
            running = apply_tx(running, tx, payoff)
        txs.extend(pick.transactions)
        filled += 1 if (bundle_as_one_slot and pick.is_bundle) else len(pick.transactions)
        if pick.is_bundle:
            tips.append(pick.tip)
            ceiling = pick.tip
    return _make_block(txs, state, payoff, builder_id, tips, filled)


STRATEGY_NAMES = ("baseline", "min-oracle-bf", "min-oracle-greedy", "fcfs", "auction")
