"""Exact statevector amplitude amplification over action-sequence ranks.

States are dense complex numpy vectors indexed by sequence rank. Oracles are
objects with ``N``, ``__call__(state, ledger)`` (one coherent query) and
``is_marked(index, ledger)`` (one classical verification query).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol, Sequence

import numpy as np

NORM_TOL = 1e-12


class LedgerError(AssertionError):
    """Interaction-step accounting drifted from its defining identity."""


class NoSolutionError(ValueError):
    pass


@dataclass
class QueryLedger:
    """Cost record. An oracularized query plays two full games (2M steps)."""

    M: int = 0
    oracle_calls: int = 0
    classical_epochs: int = 0
    interaction_steps: int = 0

    def charge_oracle(self, calls: int = 1) -> None:
        self.oracle_calls += calls
        self.interaction_steps += 2 * self.M * calls
        self.check()

    def charge_epochs(self, epochs: int = 1) -> None:
        self.classical_epochs += epochs
        self.interaction_steps += self.M * epochs
        self.check()

    def check(self) -> None:
        expected = 2 * self.M * self.oracle_calls + self.M * self.classical_epochs
        if self.interaction_steps != expected:
            raise LedgerError(
                f"interaction_steps={self.interaction_steps} but 2M*calls + M*epochs = {expected}"
            )


class Oracle(Protocol):
    N: int

    def __call__(self, state: np.ndarray, ledger: QueryLedger | None = None) -> np.ndarray: ...

    def is_marked(self, index: int, ledger: QueryLedger | None = None) -> bool: ...


def uniform_state(N: int) -> np.ndarray:
    return np.full(N, 1.0 / math.sqrt(N), dtype=complex)


def basis_state(N: int, index: int) -> np.ndarray:
    out = np.zeros(N, dtype=complex)
    out[index] = 1.0
    return out


def norm(state: np.ndarray) -> float:
    return float(np.vdot(state, state).real)


def check_normalized(state: np.ndarray) -> None:
    if abs(norm(state) - 1.0) > NORM_TOL:
        raise ValueError(f"state norm {norm(state)!r} deviates from 1")


def mask_from_predicate(predicate: Callable[[int], bool], N: int) -> np.ndarray:
    return np.fromiter((bool(predicate(i)) for i in range(N)), dtype=bool, count=N)


def phase_oracle(state: np.ndarray, marked: np.ndarray, ledger: QueryLedger | None = None) -> np.ndarray:
    """Multiply every marked amplitude by -1."""
    out = np.where(marked, -state, state)
    if ledger is not None:
        ledger.charge_oracle()
    return out


def diffusion(state: np.ndarray) -> np.ndarray:
    """Reflection about the uniform state: 2|u><u|psi> - psi."""
    return 2.0 * state.mean() - state


def marked_mass(state: np.ndarray, marked: np.ndarray) -> float:
    return float(np.sum(np.abs(state[marked]) ** 2))


def measure(state: np.ndarray, rng: np.random.Generator) -> int:
    probs = np.abs(state) ** 2
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, state.size - 1)


class PhaseOracle:
    """Direct sign-flip oracle on a tabulated predicate."""

    def __init__(self, marked: np.ndarray) -> None:
        self.marked = np.asarray(marked, dtype=bool)
        self.N = self.marked.size

    def __call__(self, state: np.ndarray, ledger: QueryLedger | None = None) -> np.ndarray:
        return phase_oracle(state, self.marked, ledger)

    def is_marked(self, index: int, ledger: QueryLedger | None = None) -> bool:
        if ledger is not None:
            ledger.charge_oracle()
        return bool(self.marked[index])


def grover_iterate(state: np.ndarray, oracle: Oracle, ledger: QueryLedger | None = None) -> np.ndarray:
    return diffusion(oracle(state, ledger))


def grover_success_probability(j: int, k: int, N: int) -> float:
    if k == 0:
        return 0.0
    if not 1 <= k <= N:
        raise ValueError("need 0 <= k <= N")
    theta = math.asin(math.sqrt(k / N))
    return math.sin((2 * j + 1) * theta) ** 2


def optimal_iterations(k: int, N: int) -> int:
    """Nearest integer to pi/(4 theta) - 1/2 (halves round up), i.e. floor(pi/(4 theta))."""
    theta = math.asin(math.sqrt(k / N))
    return math.floor(math.pi / (4 * theta))


def grover_search_known_k(
    oracle: Oracle, k: int, rng: np.random.Generator, ledger: QueryLedger | None = None
) -> tuple[int, QueryLedger]:
    if k <= 0:
        raise NoSolutionError("known-count search needs at least one marked item")
    ledger = ledger if ledger is not None else QueryLedger()
    state = uniform_state(oracle.N)
    for _ in range(optimal_iterations(k, oracle.N)):
        state = grover_iterate(state, oracle, ledger)
    return measure(state, rng), ledger


class SearchOutcome(NamedTuple):
    index: int | None
    calls: int
    rounds: int


def bbht_search(
    oracle: Oracle,
    rng: np.random.Generator,
    ledger: QueryLedger | None = None,
    *,
    c_stop: float = 30.0,
    growth: float = 6 / 5,
    cap: int | None = None,
) -> SearchOutcome:
    """Search with an unknown number of marked items.

    Every round costs its ``j`` Grover iterations plus one verification query;
    the round's ``j`` is clipped so the total never exceeds ``cap``.
    """
    N = oracle.N
    if cap is None:
        cap = math.ceil(c_stop * math.sqrt(N))
    sqrt_n = math.sqrt(N)
    m = 1.0
    calls = rounds = 0
    while calls < cap:
        j = min(int(rng.integers(0, math.ceil(m))), cap - calls - 1)
        state = uniform_state(N)
        for _ in range(j):
            state = grover_iterate(state, oracle, ledger)
        i = measure(state, rng)
        calls += j + 1
        rounds += 1
        if oracle.is_marked(i, ledger):
            return SearchOutcome(i, calls, rounds)
        m = min(growth * m, sqrt_n)
    return SearchOutcome(None, calls, rounds)


@dataclass
class Extremum:
    index: int
    ledger: QueryLedger
    thresholds: list[float] = field(default_factory=list)
    calls: int = 0


def dh_extremum(
    values: Sequence[float] | np.ndarray,
    mode: str,
    rng: np.random.Generator,
    ledger: QueryLedger | None = None,
    *,
    c_dh: float = 22.5,
    c_stop: float = 30.0,
) -> Extremum:
    """Threshold-descent extremum finding.

    Max mode runs the min-finder on negated values. Improvement requires a
    strictly better value, so equal values never displace the threshold.
    """
    if mode not in ("min", "max"):
        raise ValueError("mode must be 'min' or 'max'")
    vals = np.asarray(values, dtype=float)
    if vals.size == 0:
        raise ValueError("empty table")
    if mode == "max":
        vals = -vals
    sign = -1.0 if mode == "max" else 1.0
    ledger = ledger if ledger is not None else QueryLedger()
    N = vals.size
    budget = math.ceil(c_dh * math.sqrt(N))
    y = int(rng.integers(N))
    thresholds = [sign * vals[y]]
    used = 0
    while used < budget:
        oracle = PhaseOracle(vals < vals[y])
        cap = min(math.ceil(c_stop * math.sqrt(N)), budget - used)
        found = bbht_search(oracle, rng, ledger, cap=cap)
        used += found.calls
        if found.index is None:
            break
        y = found.index
        thresholds.append(sign * vals[y])
    return Extremum(y, ledger, thresholds, used)

