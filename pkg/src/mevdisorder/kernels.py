"""Hot-loop backend: the compiled extension when built, else pure Python.

Both backends expose the same four functions and return identical results;
``use_backend`` switches explicitly (tests and the benchmark use it).
"""
from __future__ import annotations

from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BASELINE = _pykernels.BASELINE
FCFS = _pykernels.FCFS
MIN_ORACLE = _pykernels.MIN_ORACLE

_active: ModuleType = _ckernels if _ckernels is not None else _pykernels


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


def backend_name() -> str:
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def get_backend(name: str) -> ModuleType:
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


def use_backend(name: str) -> None:
    global _active
    _active = get_backend(name)


def bruteforce_select(directions, n, s0):
    return _active.bruteforce_select(directions, n, s0)


def greedy_select(directions, n, s0):
    return _active.greedy_select(directions, n, s0)


def order_for_min_disorder(directions, chosen, s0):
    return _active.order_for_min_disorder(directions, chosen, s0)


def simulate_batch(dirs, n, strategy, payoff):
    return _active.simulate_batch(dirs, n, strategy, payoff)
