"""Black-box oracularization of a deterministic single-reward environment.

The environment is only ever driven through :func:`env_step`; the agent's
extra powers are hijacking (writing into environment-held slots) and
scavenging (keeping the systems the environment emits). Because the
environment is deterministic, each computational-basis branch of the action
register evolves on its own, so the construction is simulated branch by
branch with symbolic register contents.

One oracle query is three moves:

1. kick-back game: the reward system is hijacked into the -1 eigenstate of
   the reward flip, so a rewarded branch picks up a sign;
2. the scavenged percept systems are implanted back into their slots;
3. raw game: every percept-step map is an involution on its slot, so replaying
   the stored actions sends each implanted percept back to the empty state and
   the actions are handed back to the agent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Sequence

import numpy as np

from .environments import EnvSpec, env_step, index_to_sequence
from .quantum import QueryLedger

EMPTY = "eps"
PHI_MINUS = "phi-"
PHI_PLUS = "phi+"


class OracleConstructionError(RuntimeError):
    def __init__(self, branch: Sequence[str], detail: str) -> None:
        super().__init__(f"branch {','.join(branch)}: {detail}")
        self.branch = tuple(branch)


class UncomputeError(OracleConstructionError):
    """An implanted percept did not match the environment's own step map."""


def reward_flip(system: str) -> tuple[str, int]:
    """Pauli-X on the reward two-level system: returns (new state, phase)."""
    if system == PHI_MINUS:
        return PHI_MINUS, -1
    if system == PHI_PLUS:
        return PHI_PLUS, 1
    if system in ("0", "1"):
        return ("1" if system == "0" else "0"), 1
    raise ValueError(f"unknown reward-system state {system!r}")


def step_map(slot: Hashable, percept: Hashable) -> Hashable:
    """Two-level involution swapping the empty slot with `percept`, identity elsewhere."""
    if slot == EMPTY:
        return percept
    if slot == percept:
        return EMPTY
    return slot


@dataclass
class RegisterState:
    """Symbolic contents of every register for one basis branch."""

    branch: tuple[str, ...]
    phase: int = 1
    agent_actions: list = field(default_factory=list)
    env_actions: list = field(default_factory=list)
    env_percepts: list = field(default_factory=list)
    agent_percepts: list = field(default_factory=list)
    agent_systems: list[str] = field(default_factory=list)

    @classmethod
    def fresh(cls, branch: Sequence[str]) -> RegisterState:
        M = len(branch)
        return cls(tuple(branch), 1, list(branch), [EMPTY] * M, [EMPTY] * M, [EMPTY] * M, [])

    def residual(self) -> tuple:
        """Everything except the action register and the phase."""
        return (
            tuple(self.env_actions),
            tuple(self.env_percepts),
            tuple(self.agent_percepts),
            tuple(sorted(self.agent_systems)),
        )


def _play(spec: EnvSpec, regs: RegisterState, system: str, *, forward: bool) -> tuple[str, int]:
    """One full game of M interaction steps against the classical environment.

    Forward: the agent's actions move into the environment and each slot is
    rotated from empty to the emitted percept. Backward: the environment
    replays its stored actions and the same involutions rotate the implanted
    percepts back to empty.
    """
    state = spec.reset()
    rewarded = 0
    for t in range(spec.M):
        if forward:
            regs.env_actions[t], regs.agent_actions[t] = regs.agent_actions[t], EMPTY
        action = regs.env_actions[t]
        state, percept, r = env_step(state, spec, action)
        rewarded |= r
        regs.env_percepts[t] = step_map(regs.env_percepts[t], percept)
    system, phase = reward_flip(system) if rewarded else (system, 1)
    return system, phase


def kickback_game(spec: EnvSpec, branch: Sequence[str]) -> tuple[int, list, list, RegisterState]:
    """First game, with the reward system hijacked into phi-.

    Returns the phase, the scavenged percepts, the environment-held actions and
    the full register record.
    """
    if len(branch) != spec.M:
        raise ValueError(f"branch length {len(branch)} != M={spec.M}")
    regs = RegisterState.fresh(branch)
    system, phase = _play(spec, regs, PHI_MINUS, forward=True)
    regs.phase *= phase
    # scavenging: the emitted percept systems and the reward system leave the environment
    regs.agent_percepts, regs.env_percepts = regs.env_percepts, [EMPTY] * spec.M
    regs.agent_systems.append(system)
    return regs.phase, list(regs.agent_percepts), list(regs.env_actions), regs


def implant(regs: RegisterState, percepts: Sequence[Hashable]) -> RegisterState:
    """Hijacking: put percept systems back into their environment slots."""
    regs.env_percepts = list(percepts)
    regs.agent_percepts = [EMPTY] * len(percepts)
    return regs


def raw_game(
    spec: EnvSpec,
    regs: RegisterState,
    percepts: Sequence[Hashable],
    *,
    reward_system: str = PHI_PLUS,
) -> RegisterState:
    """Second game: uncompute the percept slots and return the actions.

    The reward system is an eigenstate with eigenvalue +1 by default, so no
    phase and no record of the reward is left behind.
    """
    implant(regs, percepts)
    system, phase = _play(spec, regs, reward_system, forward=False)
    regs.phase *= phase
    regs.agent_systems.append(system)
    bad = [t for t, s in enumerate(regs.env_percepts) if s != EMPTY]
    if bad:
        raise UncomputeError(
            regs.branch, f"percept slots {bad} not restored to empty (implanted percepts inconsistent)"
        )
    regs.agent_actions, regs.env_actions = list(regs.env_actions), [EMPTY] * spec.M
    return regs


def oracle_branch(spec: EnvSpec, branch: Sequence[str], *, reward_system: str = PHI_PLUS) -> RegisterState:
    _, percepts, _, regs = kickback_game(spec, branch)
    return raw_game(spec, regs, percepts, reward_system=reward_system)


def fiducial_residual(M: int) -> tuple:
    empty = (EMPTY,) * M
    return (empty, empty, empty, tuple(sorted([PHI_MINUS, PHI_PLUS])))


@dataclass(frozen=True)
class BranchRecord:
    branch: tuple[str, ...]
    phase: int
    restored: bool


class OracularizedEnv:
    """Effective action-register oracle realized by the two-game construction."""

    def __init__(self, spec: EnvSpec, *, reward_system: str = PHI_PLUS) -> None:
        self.spec = spec
        self.N = spec.N
        self.M = spec.M
        fiducial = fiducial_residual(spec.M)
        records = []
        for i in range(self.N):
            branch = index_to_sequence(i, spec.M, spec.actions)
            regs = oracle_branch(spec, branch, reward_system=reward_system)
            if tuple(regs.agent_actions) != branch:
                raise OracleConstructionError(branch, "action register not returned intact")
            restored = regs.residual() == fiducial
            if not restored:
                raise OracleConstructionError(branch, f"residual registers {regs.residual()} != fiducial")
            records.append(BranchRecord(branch, regs.phase, restored))
        self.records = records
        self.phases = np.array([r.phase for r in records], dtype=float)
        self.marked = self.phases < 0

    def __call__(self, state: np.ndarray, ledger: QueryLedger | None = None) -> np.ndarray:
        if ledger is not None:
            ledger.charge_oracle()
        return state * self.phases

    def is_marked(self, index: int, ledger: QueryLedger | None = None) -> bool:
        # verification of a measured sequence costs one more two-game query
        if ledger is not None:
            ledger.charge_oracle()
        return bool(self.marked[index])


@lru_cache(maxsize=32)
def oracularize(spec: EnvSpec) -> OracularizedEnv:
    return OracularizedEnv(spec)


def verify_equivalence(spec: EnvSpec) -> tuple[bool, list[str]]:
    """Compare the construction with the direct phase oracle on every basis branch."""
    oracle = oracularize(spec)
    direct = np.where(spec.reward_mask, -1.0, 1.0)
    problems = [
        f"{','.join(r.branch)}: constructed {r.phase:+d}, direct {int(d):+d}"
        for r, d in zip(oracle.records, direct)
        if r.phase != d or not r.restored
    ]
    return not problems, problems
