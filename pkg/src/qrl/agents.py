"""Classical learners: a projective-simulation agent and the uniform random baseline."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import yaml

from .environments import ACTIONS, EnvSpec, env_step
from .interaction import History


@dataclass
class PSAgent:
    """Two-layer PS clip network with h-proportional policy.

    ``h`` rows start at 1 and are damped back towards 1 by ``gamma``; ``g`` is the
    glow that carries the epoch reward back to recently used edges.
    """

    gamma: float = 0.0
    eta: float = 1.0
    actions: tuple[str, ...] = ACTIONS
    h: dict[Hashable, list[float]] = field(default_factory=dict)
    g: dict[Hashable, list[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0 and 0.0 <= self.eta <= 1.0):
            raise ValueError("gamma and eta must lie in [0, 1]")
        self._col = {a: i for i, a in enumerate(self.actions)}

    def _row(self, percept: Hashable) -> list[float]:
        row = self.h.get(percept)
        if row is None:
            row = self.h[percept] = [1.0] * len(self.actions)
        if percept not in self.g:
            self.g[percept] = [0.0] * len(self.actions)
        return row

    def column(self, action: str) -> int:
        return self._col[action]


@dataclass(frozen=True)
class RandomAgent:
    actions: tuple[str, ...] = ACTIONS


Agent = PSAgent | RandomAgent


def policy(agent: Agent, percept: Hashable) -> np.ndarray:
    if isinstance(agent, RandomAgent):
        return np.full(len(agent.actions), 1.0 / len(agent.actions))
    row = np.asarray(agent._row(percept))
    return row / row.sum()


def sample_action(agent: Agent, percept: Hashable, rng: np.random.Generator) -> str:
    """Inverse-CDF draw from the policy using one uniform from `rng`."""
    u = rng.random()
    if isinstance(agent, RandomAgent):
        return agent.actions[min(int(u * len(agent.actions)), len(agent.actions) - 1)]
    row = agent._row(percept)
    target = u * sum(row)
    acc = 0.0
    for a, w in zip(agent.actions, row):
        acc += w
        if target < acc:
            return a
    return agent.actions[-1]


def ps_update(agent: PSAgent, trace: Sequence[tuple[Hashable, str]], reward: int) -> PSAgent:
    """One end-of-epoch update, in place; returns the agent for chaining."""
    if not trace:
        raise ValueError("trace must be non-empty")
    for s in list(agent.h):
        agent._row(s)
    keep = 1.0 - agent.eta
    for s in agent.g:
        agent.g[s] = [keep * v for v in agent.g[s]]
    for s, a in trace:
        agent._row(s)
        agent.g[s][agent.column(a)] = 1.0
    damp = agent.gamma
    for s, row in agent.h.items():
        glow = agent.g[s]
        agent.h[s] = [hv - damp * (hv - 1.0) + gv * reward for hv, gv in zip(row, glow)]
    return agent


def clone_agent(agent: Agent) -> Agent:
    return copy.deepcopy(agent)


def run_epoch(
    agent: Agent,
    spec: EnvSpec,
    rng: np.random.Generator,
    *,
    learn: bool = True,
    history: History | None = None,
    epoch: int = 0,
) -> tuple[list[tuple[Hashable, str]], int]:
    """Play one epoch from reset. Returns the (percept, action) trace and the epoch reward."""
    state = spec.reset()
    percept = spec.percept_of(state.cell)
    if history is not None:
        history.add_percept(percept, 0, epoch)
    trace = []
    total = 0
    for _ in range(spec.M):
        action = sample_action(agent, percept, rng)
        trace.append((percept, action))
        state, percept, r = env_step(state, spec, action)
        total += r
        if history is not None:
            history.add_action(action, epoch)
            history.add_percept(percept, r, epoch)
    if learn and isinstance(agent, PSAgent):
        ps_update(agent, trace, total)
    return trace, total


def reward_probability(agent: Agent, spec: EnvSpec) -> float:
    """Exact probability that one epoch is rewarded, by forward propagation over cells."""
    dist = {spec.start: 1.0}
    hit = 0.0
    for _ in range(spec.M):
        nxt: dict = {}
        for cell, p in dist.items():
            probs = policy(agent, spec.percept_of(cell))
            for a, q in zip(agent.actions, probs):
                c = spec.transition(cell, a)
                if c == spec.goal:
                    hit += p * q
                else:
                    nxt[c] = nxt.get(c, 0.0) + p * q
        dist = nxt
    return hit


def agent_to_dict(agent: PSAgent) -> dict:
    def key(s: Hashable) -> str:
        return ",".join(map(str, s)) if isinstance(s, tuple) else str(s)

    return {
        "gamma": agent.gamma,
        "eta": agent.eta,
        "actions": list(agent.actions),
        "h": {key(s): list(map(float, row)) for s, row in agent.h.items()},
        "g": {key(s): list(map(float, row)) for s, row in agent.g.items()},
    }


def agent_from_dict(data: dict) -> PSAgent:
    def unkey(s: str) -> Hashable:
        parts = s.split(",")
        try:
            return tuple(int(p) for p in parts) if len(parts) > 1 else int(s)
        except ValueError:
            return s

    agent = PSAgent(float(data["gamma"]), float(data["eta"]), tuple(data["actions"]))
    agent.h = {unkey(s): [float(v) for v in row] for s, row in data["h"].items()}
    agent.g = {unkey(s): [float(v) for v in row] for s, row in data["g"].items()}
    return agent


def dump_agent(agent: PSAgent) -> str:
    return yaml.safe_dump(agent_to_dict(agent), sort_keys=True)


def load_agent(text: str) -> PSAgent:
    return agent_from_dict(yaml.safe_load(text))
