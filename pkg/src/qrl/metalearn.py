"""Metalearning over PS metaparameters (gamma, eta).

A configuration is scored by training a fresh agent and measuring its frozen
reward rate; the table of scores is then searched exhaustively, by bisection
along a unimodal axis, or by threshold-descent amplitude amplification.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .agents import PSAgent, run_epoch
from .environments import ENUMERATION_GUARD, EnvSpec
from .quantum import Extremum, QueryLedger, dh_extremum, measure

AXIS_NAMES = ("gamma", "eta")
DEFAULTS = {"gamma": 0.0, "eta": 1.0}


@dataclass(frozen=True)
class MetaParamGrid:
    """Cartesian grid; the first axis varies slowest in the flat index."""

    axes: tuple[tuple[str, tuple[float, ...]], ...]

    def __post_init__(self) -> None:
        if not self.axes:
            raise ValueError("grid needs at least one axis")
        for name, values in self.axes:
            if name not in AXIS_NAMES:
                raise ValueError(f"unknown metaparameter {name!r}")
            if not values:
                raise ValueError(f"axis {name} is empty")
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise ValueError(f"axis {name} has values outside [0, 1]")

    @classmethod
    def from_dict(cls, spec: dict[str, Sequence[float]]) -> MetaParamGrid:
        return cls(tuple((name, tuple(float(v) for v in vals)) for name, vals in spec.items()))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(v) for _, v in self.axes)

    def __len__(self) -> int:
        return math.prod(self.shape)

    def config(self, index: int) -> dict[str, float]:
        if not 0 <= index < len(self):
            raise IndexError(index)
        pos = np.unravel_index(index, self.shape)
        out = dict(DEFAULTS)
        out.update({name: vals[p] for (name, vals), p in zip(self.axes, pos)})
        return out

    def configs(self) -> list[dict[str, float]]:
        return [self.config(i) for i in range(len(self))]


@dataclass(frozen=True)
class SeedPolicy:
    """Derandomizes eval: replicate r of config k draws from ``[master, r]``.

    With common random numbers (the default) the stream ignores k, so
    neighbouring configurations are compared on the same luck.
    """

    master_seed: int = 0
    replicates: int = 32
    common_random_numbers: bool = True

    def rng(self, k_index: int, replicate: int) -> np.random.Generator:
        if self.common_random_numbers:
            return np.random.default_rng([self.master_seed, replicate])
        return np.random.default_rng([self.master_seed, k_index, replicate])


def eval_config(
    k: dict[str, float],
    spec: EnvSpec,
    train_epochs: int,
    eval_epochs: int,
    seeds: SeedPolicy = SeedPolicy(),
    k_index: int = 0,
) -> float:
    """Mean frozen-policy reward rate of a freshly trained agent, over replicates."""
    if eval_epochs <= 0:
        raise ValueError("eval_epochs must be positive")
    scores = []
    for r in range(seeds.replicates):
        rng = seeds.rng(k_index, r)
        agent = PSAgent(gamma=k.get("gamma", DEFAULTS["gamma"]), eta=k.get("eta", DEFAULTS["eta"]),
                        actions=spec.actions)
        for _ in range(train_epochs):
            run_epoch(agent, spec, rng)
        hits = sum(run_epoch(agent, spec, rng, learn=False)[1] for _ in range(eval_epochs))
        scores.append(hits / eval_epochs)
    return math.fsum(scores) / len(scores)


class EvalTable:
    """Lazily filled eval(k) table; ``query_count`` counts distinct evaluations."""

    def __init__(self, size: int, evaluate: Callable[[int], float], provenance: dict | None = None) -> None:
        self.size = size
        self._evaluate = evaluate
        self._cache: dict[int, float] = {}
        self.provenance = dict(provenance or {})

    @classmethod
    def from_values(cls, values: Sequence[float], provenance: dict | None = None) -> EvalTable:
        vals = [float(v) for v in values]
        return cls(len(vals), vals.__getitem__, provenance or {"source": "explicit"})

    @classmethod
    def for_grid(
        cls,
        grid: MetaParamGrid,
        spec: EnvSpec,
        train_epochs: int,
        eval_epochs: int,
        seeds: SeedPolicy = SeedPolicy(),
    ) -> EvalTable:
        def evaluate(i: int) -> float:
            return eval_config(grid.config(i), spec, train_epochs, eval_epochs, seeds, k_index=i)

        prov = {
            "environment": spec.name,
            "train_epochs": train_epochs,
            "eval_epochs": eval_epochs,
            "master_seed": seeds.master_seed,
            "replicates": seeds.replicates,
            "common_random_numbers": seeds.common_random_numbers,
        }
        return cls(len(grid), evaluate, prov)

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, index: int) -> float:
        if not 0 <= index < self.size:
            raise IndexError(index)
        if index not in self._cache:
            self._cache[index] = self._evaluate(index)
        return self._cache[index]

    @property
    def query_count(self) -> int:
        return len(self._cache)

    def values(self) -> np.ndarray:
        return np.array([self[i] for i in range(self.size)])


def grid_search(table: EvalTable) -> tuple[int, int]:
    """Exhaustive argmax, ties to the lowest index; returns (index, queries)."""
    vals = table.values()
    return int(np.argmax(vals)), len(table)


@dataclass
class UnimodalResult:
    index: int
    queries: int
    unimodal: bool | None = None


def is_unimodal(values: Sequence[float], tol: float = 0.0) -> bool:
    """Strictly rising up to the first maximum, non-increasing after it.

    With ``tol=0`` this is exactly the class on which slope bisection lands on
    the lowest global argmax. A positive ``tol`` forgives Monte-Carlo wiggles
    of that size and drops the guarantee.
    """
    v = list(values)
    peak = int(np.argmax(v))
    if tol == 0.0:
        rising = all(v[i] < v[i + 1] for i in range(peak))
    else:
        rising = all(v[i + 1] > v[i] - tol for i in range(peak))
    falling = all(v[i + 1] <= v[i] + tol for i in range(peak, len(v) - 1))
    return rising and falling


def unimodal_search(table: EvalTable, *, audit: bool = False, tol: float = 0.0) -> UnimodalResult:
    """Bisection on the sign of eval(i+1) - eval(i)."""
    seen: set[int] = set()

    def q(i: int) -> float:
        seen.add(i)
        return table[i]

    lo, hi = 0, len(table) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if q(mid) < q(mid + 1):
            lo = mid + 1
        else:
            hi = mid
    result = UnimodalResult(lo, len(seen))
    if audit:
        result.unimodal = is_unimodal(table.values(), tol)
    return result


def query_cap(n: int) -> int:
    return 2 * math.ceil(math.log2(n)) if n > 1 else 0


def quantum_meta_opt(
    table: EvalTable,
    rng: np.random.Generator,
    *,
    c_dh: float = 22.5,
    ledger: QueryLedger | None = None,
) -> Extremum:
    """Max-finding over the table by threshold-descent amplitude amplification.

    The simulator materializes the whole table to build each marking predicate;
    only the coherent queries are charged to the ledger.
    """
    return dh_extremum(table.values(), "max", rng, ledger, c_dh=c_dh)


EVAL_BINS = 16


def eval_bin(value: float, bins: int = EVAL_BINS) -> int:
    return min(int(math.floor(value * bins)), bins - 1)


@dataclass
class SuperposedState:
    """Amplitudes over (k, eval-bin) pairs, uniform over k."""

    amplitudes: np.ndarray
    bins: int = EVAL_BINS
    labels: list[int] = field(default_factory=list)

    @property
    def n_configs(self) -> int:
        return self.amplitudes.shape[0]

    def k_distribution(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def bin_distribution(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)

    def measure_k(self, rng: np.random.Generator, shots: int) -> np.ndarray:
        flat = self.k_distribution().astype(complex) ** 0.5
        return np.array([measure(flat, rng) for _ in range(shots)])

    def post_select(self, bin_index: int) -> SuperposedState:
        """Collapse on an observed eval bin; the k register keeps the whole preimage."""
        col = self.amplitudes[:, bin_index]
        weight = float(np.sum(np.abs(col) ** 2))
        if weight == 0.0:
            raise ValueError(f"bin {bin_index} has zero probability")
        out = np.zeros_like(self.amplitudes)
        out[:, bin_index] = col / math.sqrt(weight)
        return SuperposedState(out, self.bins, self.labels)

    def support(self) -> set[int]:
        return {int(k) for k in np.flatnonzero(self.k_distribution() > 0)}


def build_superposed_state(table: EvalTable, bins: int = EVAL_BINS) -> SuperposedState:
    n = len(table)
    if n * bins > ENUMERATION_GUARD:
        raise ValueError("superposed state exceeds the enumeration guard")
    labels = [eval_bin(v, bins) for v in table.values()]
    amps = np.zeros((n, bins), dtype=complex)
    amps[np.arange(n), labels] = 1.0 / math.sqrt(n)
    return SuperposedState(amps, bins, labels)


def linspace_axis(start: float, stop: float, num: int) -> tuple[float, ...]:
    return tuple(float(v) for v in np.round(np.linspace(start, stop, num), 12))


def single_axis(grid: MetaParamGrid) -> int:
    """Index of the one axis with more than one value (for bisection)."""
    varying = [i for i, n in enumerate(grid.shape) if n > 1]
    if len(varying) > 1:
        raise ValueError("unimodal search needs a grid with a single varying axis")
    return varying[0] if varying else 0

