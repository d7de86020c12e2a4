"""Quantum-enhanced agent: untested oracle exploration, internal lucky training,
then tested classical exploitation, compared against the classical learner at
a matched interaction-step budget."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable

import numpy as np

from .agents import PSAgent, clone_agent, ps_update, run_epoch
from .environments import EnvSpec, index_to_sequence
from .interaction import History, TesterSchedule, Transcript, apply_tester, epoch_reward_rate
from .oracle import kickback_game, oracularize
from .quantum import QueryLedger, bbht_search

EXPLORING = "exploring"
EXPLOITING = "exploiting"

# rng stream ids under one run seed
ACTION_STREAM = 1
QUANTUM_STREAM = 2


def stream(seed: int, stream_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream_id])


@dataclass
class HybridAgent:
    inner: PSAgent
    exploration_budget: int
    replay_count: int = 10
    found: list[tuple[tuple[str, ...], list[Hashable]]] = field(default_factory=list)
    phase: str = EXPLORING
    ledger: QueryLedger = field(default_factory=QueryLedger)


def explore(agent: HybridAgent, spec: EnvSpec, rng: np.random.Generator, *, c_stop: float = 30.0) -> HybridAgent:
    """Unknown-count amplitude amplification against the oracularized environment.

    Restarts the search until a rewarding sequence turns up or the step budget
    can no longer pay for a query.
    """
    if agent.phase != EXPLORING:
        raise RuntimeError("exploration is over")
    agent.ledger.M = spec.M
    if spec.M == 0 or agent.exploration_budget < 2 * spec.M:
        return agent
    oracle = oracularize(spec)
    calls_left = agent.exploration_budget // (2 * spec.M)
    per_search = math.ceil(c_stop * math.sqrt(oracle.N))
    while calls_left > 0:
        out = bbht_search(oracle, rng, agent.ledger, cap=min(per_search, calls_left))
        calls_left -= out.calls
        if out.index is not None:
            record = oracle.records[out.index]
            if record.phase != -1:
                raise AssertionError(f"search returned unrewarded branch {record.branch}")
            _, percepts = _scavenged(spec, out.index)
            agent.found.append((record.branch, percepts))
            break
    return agent


def _scavenged(spec: EnvSpec, index: int) -> tuple[tuple[str, ...], list[Hashable]]:
    branch = index_to_sequence(index, spec.M, spec.actions)
    _, percepts, _, _ = kickback_game(spec, branch)
    return branch, percepts


def lucky_trace(spec: EnvSpec, branch: Iterable[str], percepts: list[Hashable]) -> list[tuple[Hashable, str]]:
    """Pair each action with the percept the agent saw before taking it."""
    seen = [spec.percept_of(spec.start)] + list(percepts[:-1])
    return list(zip(seen, branch))


def train_lucky(agent: HybridAgent, spec: EnvSpec, replay_count: int | None = None) -> HybridAgent:
    """Replay a found rewarding epoch on a simulated copy of the inner learner; costs no steps."""
    r = agent.replay_count if replay_count is None else replay_count
    if not agent.found or r <= 0:
        return agent
    branch, percepts = agent.found[0]
    trace = lucky_trace(spec, branch, percepts)
    lucky = clone_agent(agent.inner)
    for _ in range(r):
        ps_update(lucky, trace, 1)
    agent.inner = lucky
    return agent


def exploit(
    agent: HybridAgent,
    spec: EnvSpec,
    epochs: int,
    rng: np.random.Generator,
    tester: TesterSchedule | None = None,
) -> tuple[Transcript, History]:
    """Hand control to the (possibly lucky) inner learner for classical epochs."""
    agent.phase = EXPLOITING
    agent.ledger.M = spec.M
    history = play_epochs(agent.inner, spec, epochs, rng, agent.ledger)
    if tester is None:
        tester = TesterSchedule.classical(len(history))
    return apply_tester(history, tester), history


def play_epochs(agent: PSAgent, spec: EnvSpec, epochs: int, rng: np.random.Generator, ledger: QueryLedger) -> History:
    history = History()
    for e in range(epochs):
        run_epoch(agent, spec, rng, history=history, epoch=e)
        ledger.charge_epochs()
    return history


def entries_per_epoch(spec: EnvSpec) -> int:
    return 2 * spec.M + 1


@dataclass
class ArmResult:
    arm: str
    seed: int
    merit: float
    oracle_calls: int
    interaction_steps: int
    classical_epochs: int
    first_reward: bool
    transcript: Transcript = field(repr=False, default_factory=Transcript)


def run_classical(agent: PSAgent, spec: EnvSpec, total_steps: int, tested_epochs: int, seed: int) -> ArmResult:
    ledger = QueryLedger(M=spec.M)
    epochs = total_steps // spec.M
    history = play_epochs(clone_agent(agent), spec, epochs, stream(seed, ACTION_STREAM), ledger)
    tester = TesterSchedule.tested_tail(epochs, tested_epochs, entries_per_epoch(spec))
    transcript = apply_tester(history, tester)
    first = any(e.reward for e in history.entries)
    return ArmResult("classical", seed, epoch_reward_rate(transcript), ledger.oracle_calls,
                     ledger.interaction_steps, ledger.classical_epochs, first, transcript)


def run_hybrid(
    agent: PSAgent,
    spec: EnvSpec,
    total_steps: int,
    tested_epochs: int,
    seed: int,
    *,
    replay_count: int = 10,
    explore_fraction: float | None = None,
    c_stop: float = 30.0,
) -> ArmResult:
    """Explore untested, train the lucky copy, then exploit until the budget is spent.

    With ``explore_fraction=None`` exploration may use the whole untested
    prefix, i.e. everything except the final ``tested_epochs`` epochs.
    """
    if explore_fraction is None:
        budget = max(total_steps - tested_epochs * spec.M, 0)
    else:
        budget = int(explore_fraction * total_steps)
    hybrid = HybridAgent(clone_agent(agent), budget, replay_count, ledger=QueryLedger(M=spec.M))
    explore(hybrid, spec, stream(seed, QUANTUM_STREAM), c_stop=c_stop)
    train_lucky(hybrid, spec)
    epochs = (total_steps - hybrid.ledger.interaction_steps) // spec.M
    tester = TesterSchedule.tested_tail(epochs, tested_epochs, entries_per_epoch(spec))
    transcript, history = exploit(hybrid, spec, epochs, stream(seed, ACTION_STREAM), tester)
    first = bool(hybrid.found) or any(e.reward for e in history.entries)
    led = hybrid.ledger
    return ArmResult("hybrid", seed, epoch_reward_rate(transcript), led.oracle_calls,
                     led.interaction_steps, led.classical_epochs, first, transcript)


def matched_budget(spec: EnvSpec, tested_epochs: int, c_budget: float = 8.0) -> int:
    """2M * ceil(c sqrt N) exploration steps plus the tested exploitation window."""
    return 2 * spec.M * math.ceil(c_budget * math.sqrt(spec.N)) + spec.M * tested_epochs


@dataclass
class ComparisonReport:
    rows: list[ArmResult]

    def merits(self, arm: str) -> np.ndarray:
        return np.array([r.merit for r in self.rows if r.arm == arm])

    def mean(self, arm: str) -> float:
        return float(self.merits(arm).mean())

    def ci95(self, arm: str) -> tuple[float, float]:
        x = self.merits(arm)
        half = 1.96 * x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else 0.0
        return float(x.mean() - half), float(x.mean() + half)

    def success_rate(self, arm: str) -> float:
        return float(np.mean([r.first_reward for r in self.rows if r.arm == arm]))


def compare_budgeted(
    agent: PSAgent,
    spec: EnvSpec,
    total_steps: int,
    seeds: Iterable[int],
    *,
    tested_epochs: int = 200,
    replay_count: int = 10,
    explore_fraction: float | None = None,
) -> ComparisonReport:
    rows = []
    for seed in seeds:
        rows.append(run_classical(agent, spec, total_steps, tested_epochs, seed))
        rows.append(run_hybrid(agent, spec, total_steps, tested_epochs, seed,
                               replay_count=replay_count, explore_fraction=explore_fraction))
    return ComparisonReport(rows)
