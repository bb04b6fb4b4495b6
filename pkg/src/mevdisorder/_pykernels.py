"""Pure-Python reference for the hot loops; must match ``_ckernels`` exactly."""
from itertools import combinations

import numpy as np

BASELINE, FCFS, MIN_ORACLE = 0, 1, 2


def bruteforce_select(directions, n, s0):
    """Lexicographically first n-subset minimising ``|s0 + sum|``."""
    d = [int(x) for x in directions]
    best = None
    best_cost = None
    for combo in combinations(range(len(d)), n):
        cost = abs(s0 + sum(d[i] for i in combo))
        if best_cost is None or cost < best_cost:
            best, best_cost = combo, cost
    return np.asarray(best if best is not None else (), dtype=np.int64)


def greedy_select(directions, n, s0):
    buys = [i for i, x in enumerate(directions) if x > 0]
    sells = [i for i, x in enumerate(directions) if x < 0]
    nb, ns = len(buys), len(sells)
    if nb + ns < n:
        raise ValueError("mempool smaller than block")
    lo, hi = max(0, n - ns), min(n, nb)
    # buys needed to land on zero, rounded both ways
    t_floor = (n - s0) // 2
    cands = sorted({min(max(t_floor, lo), hi), min(max(t_floor + 1, lo), hi)})
    costs = [abs(s0 + 2 * x - n) for x in cands]
    x = cands[0]
    if len(cands) == 2:
        if costs[1] < costs[0]:
            x = cands[1]
        elif costs[1] == costs[0]:
            # the two sets differ by one element: keep the earlier-arriving one
            x = cands[0] if sells[n - cands[0] - 1] < buys[cands[0]] else cands[1]
    return np.asarray(sorted(buys[:x] + sells[: n - x]), dtype=np.int64)


def order_for_min_disorder(directions, chosen, s0):
    """Alternate sides to keep the running imbalance near zero."""
    buys = [i for i in chosen if directions[i] > 0]
    sells = [i for i in chosen if directions[i] < 0]
    bi = si = 0
    s = s0
    out = []
    while bi < len(buys) or si < len(sells):
        has_b, has_s = bi < len(buys), si < len(sells)
        if has_b and has_s:
            if s > 0:
                take_buy = False
            elif s < 0:
                take_buy = True
            else:
                take_buy = buys[bi] < sells[si]
        else:
            take_buy = has_b
        if take_buy:
            out.append(buys[bi])
            bi += 1
            s += 1
        else:
            out.append(sells[si])
            si += 1
            s -= 1
    return np.asarray(out, dtype=np.int64)


def _pay(payoff, k):
    if k >= len(payoff) or payoff[k] < 0:
        raise ValueError(f"payoff table does not cover an imbalance of {k}")
    return int(payoff[k])


def simulate_batch(dirs, n, strategy, payoff):
    """Run every realisation in `dirs` (shape runs x blocks x mempool).

    Returns the imbalance after each slot, total searcher payoff, number of
    arbitrages and the disorder after the final slot, per run.
    """
    runs, blocks, m = dirs.shape
    traj = np.zeros((runs, blocks * n), dtype=np.int64)
    mev = np.zeros(runs, dtype=np.int64)
    arbs = np.zeros(runs, dtype=np.int64)
    terminal = np.zeros(runs, dtype=np.int64)
    if strategy == BASELINE:
        walk = np.cumsum(dirs[:, :, :n].reshape(runs, blocks * n), axis=1, dtype=np.int64)
        traj[:] = walk
        terminal[:] = np.abs(walk[:, -1])
        return traj, mev, arbs, terminal
    for r in range(runs):
        s = 0
        step = 0
        total = 0
        count = 0
        for b in range(blocks):
            row = dirs[r, b]
            if strategy == FCFS:
                ti = 0
                for _ in range(n):
                    if s != 0:
                        total += _pay(payoff, abs(s))
                        count += 1
                        s = 0
                    else:
                        if ti >= m:
                            raise ValueError("trade stream exhausted")
                        s += int(row[ti])
                        ti += 1
                    traj[r, step] = s
                    step += 1
            elif strategy == MIN_ORACLE:
                chosen = greedy_select(row, n, s)
                for i in order_for_min_disorder(row, chosen, s):
                    s += int(row[i])
                    traj[r, step] = s
                    step += 1
            else:
                raise ValueError(f"unknown strategy code {strategy}")
        mev[r] = total
        arbs[r] = count
        terminal[r] = abs(traj[r, -1])
    return traj, mev, arbs, terminal
