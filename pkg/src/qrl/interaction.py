"""Percept/action alphabets, interaction histories, testers and merits."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Hashable, Sequence

PERCEPT = "percept"
ACTION = "action"


class ScheduleOverflowError(ValueError):
    """History is longer than the tester's horizon."""


@dataclass(frozen=True)
class Alphabets:
    percepts: tuple[Hashable, ...]
    actions: tuple[Hashable, ...]

    def __post_init__(self) -> None:
        if not self.percepts or not self.actions:
            raise ValueError("percept and action sets must be non-empty")
        if set(self.percepts) & set(self.actions):
            raise ValueError("percept and action identifiers must be disjoint")
        if len(set(self.percepts)) != len(self.percepts) or len(set(self.actions)) != len(self.actions):
            raise ValueError("alphabets must not contain duplicates")


@dataclass(frozen=True)
class Entry:
    kind: str
    symbol: Hashable
    reward: int = 0
    epoch: int = 0


@dataclass
class History:
    """Alternating percept/action record, each epoch opening with a percept."""

    entries: list[Entry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def _expected_kind(self, epoch: int) -> str:
        if not self.entries or self.entries[-1].epoch != epoch:
            return PERCEPT
        return ACTION if self.entries[-1].kind == PERCEPT else PERCEPT

    def add_percept(self, symbol: Hashable, reward: int = 0, epoch: int = 0) -> None:
        if self._expected_kind(epoch) != PERCEPT:
            raise ValueError("expected an action, got a percept")
        if reward not in (0, 1):
            raise ValueError("rewards are binary")
        self.entries.append(Entry(PERCEPT, symbol, int(reward), epoch))

    def add_action(self, symbol: Hashable, epoch: int = 0) -> None:
        if self._expected_kind(epoch) != ACTION:
            raise ValueError("expected a percept, got an action")
        self.entries.append(Entry(ACTION, symbol, 0, epoch))

    def extend(self, other: History) -> None:
        self.entries.extend(other.entries)


@dataclass(frozen=True)
class TesterSchedule:
    """Per-entry record flags; all-true is a classical tester."""

    __test__ = False

    tested: tuple[bool, ...]

    @property
    def horizon(self) -> int:
        return len(self.tested)

    @property
    def is_classical(self) -> bool:
        return all(self.tested)

    @classmethod
    def classical(cls, horizon: int) -> TesterSchedule:
        return cls((True,) * horizon)

    @classmethod
    def from_epochs(cls, epoch_flags: Sequence[bool], entries_per_epoch: int) -> TesterSchedule:
        return cls(tuple(flag for flag in epoch_flags for _ in range(entries_per_epoch)))

    @classmethod
    def tested_tail(cls, epochs: int, tested_epochs: int, entries_per_epoch: int) -> TesterSchedule:
        """Leave the first epochs untested and record only the last `tested_epochs`."""
        tested_epochs = min(tested_epochs, epochs)
        flags = [False] * (epochs - tested_epochs) + [True] * tested_epochs
        return cls.from_epochs(flags, entries_per_epoch)

    def covers(self, other: TesterSchedule) -> bool:
        """True when every step tested by `other` is also tested here."""
        return all(a or not b for a, b in zip(self.tested, other.tested))


@dataclass(frozen=True)
class TranscriptEntry:
    step: int
    epoch: int
    kind: str
    symbol: Hashable
    reward: int


@dataclass(frozen=True)
class Transcript:
    entries: tuple[TranscriptEntry, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def percepts(self) -> list[TranscriptEntry]:
        return [e for e in self.entries if e.kind == PERCEPT]

    def actions(self) -> list[TranscriptEntry]:
        return [e for e in self.entries if e.kind == ACTION]

    def epochs(self) -> list[int]:
        return sorted({e.epoch for e in self.entries})

    def filter(self, schedule: TesterSchedule) -> Transcript:
        return Transcript(tuple(e for e in self.entries if e.step < schedule.horizon and schedule.tested[e.step]))


def apply_tester(history: History, schedule: TesterSchedule) -> Transcript:
    if len(history) > schedule.horizon:
        raise ScheduleOverflowError(
            f"history has {len(history)} steps but the tester horizon is {schedule.horizon}"
        )
    return Transcript(
        tuple(
            TranscriptEntry(i, e.epoch, e.kind, e.symbol, e.reward)
            for i, (e, tested) in enumerate(zip(history.entries, schedule.tested))
            if tested
        )
    )


def average_reward(transcript: Transcript, window: range | None = None) -> float:
    """Mean reward over percept entries whose step index falls in `window`."""
    rewards = [
        e.reward for e in transcript.entries
        if e.kind == PERCEPT and (window is None or e.step in window)
    ]
    if not rewards:
        return 0.0
    return sum(rewards) / len(rewards)


def epoch_reward_rate(transcript: Transcript) -> float:
    """Fraction of tested epochs carrying a reward; the finite-horizon merit."""
    epochs = transcript.epochs()
    if not epochs:
        return 0.0
    rewarded = {e.epoch for e in transcript.entries if e.kind == PERCEPT and e.reward}
    return len(rewarded) / len(epochs)


def _fmt_symbol(symbol: Hashable) -> str:
    if isinstance(symbol, tuple):
        return "(" + ",".join(str(s) for s in symbol) + ")"
    return str(symbol)


CSV_COLUMNS = ("step", "epoch", "kind", "symbol", "reward", "tested")


def transcript_csv(history: History, schedule: TesterSchedule | None = None) -> str:
    """Serialize a history with its tested flags; untested rows carry tested=0."""
    if schedule is None:
        schedule = TesterSchedule.classical(len(history))
    if len(history) > schedule.horizon:
        raise ScheduleOverflowError("history longer than tester horizon")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for i, e in enumerate(history.entries):
        writer.writerow([i, e.epoch, e.kind, _fmt_symbol(e.symbol), e.reward, int(schedule.tested[i])])
    return buf.getvalue()


def read_transcript_csv(text: str) -> Transcript:
    """Parse the tested rows back into a transcript (symbols stay as strings)."""
    rows = csv.DictReader(io.StringIO(text))
    return Transcript(
        tuple(
            TranscriptEntry(int(r["step"]), int(r["epoch"]), r["kind"], r["symbol"], int(r["reward"]))
            for r in rows
            if r["tested"] == "1"
        )
    )

