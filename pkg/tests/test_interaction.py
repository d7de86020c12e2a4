from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrl.interaction import (
    Alphabets,
    History,
    ScheduleOverflowError,
    TesterSchedule,
    apply_tester,
    average_reward,
    epoch_reward_rate,
    read_transcript_csv,
    transcript_csv,
)


def four_step(rewards=(0, 0)) -> History:
    h = History()
    h.add_percept("s0", rewards[0])
    h.add_action("R")
    h.add_percept("s1", rewards[1])
    h.add_action("U")
    return h


def test_alphabets_reject_overlap_and_empty():
    with pytest.raises(ValueError):
        Alphabets(("a", "b"), ("b",))
    with pytest.raises(ValueError):
        Alphabets((), ("R",))


def test_history_alternates_from_percept():
    h = History()
    with pytest.raises(ValueError):
        h.add_action("R")
    h.add_percept("s")
    with pytest.raises(ValueError):
        h.add_percept("s")
    with pytest.raises(ValueError):
        History().add_percept("s", reward=2)


def test_classical_tester_copies_everything():
    t = apply_tester(four_step(), TesterSchedule.classical(4))
    assert len(t) == 4


def test_untested_interaction_leaves_no_trace():
    assert len(apply_tester(four_step(), TesterSchedule((False,) * 4))) == 0


def test_sporadic_schedule_keeps_steps_3_and_4():
    t = apply_tester(four_step(), TesterSchedule((False, False, True, True)))
    assert [e.step for e in t.entries] == [2, 3]
    assert [e.symbol for e in t.entries] == ["s1", "U"]


def test_schedule_overflow():
    with pytest.raises(ScheduleOverflowError):
        apply_tester(four_step(), TesterSchedule.classical(3))


def test_average_reward_examples():
    h = History()
    for r in (0, 0, 1, 1):
        h.add_percept("s", r)
        h.add_action("R")
    t = apply_tester(h, TesterSchedule.classical(len(h)))
    assert average_reward(t) == 0.5
    assert average_reward(apply_tester(History(), TesterSchedule.classical(0))) == 0.0


def test_epoch_reward_rate_counts_rewarded_epochs():
    h = History()
    for epoch, r in enumerate((0, 1, 0, 1)):
        h.add_percept("s", 0, epoch)
        h.add_action("R", epoch)
        h.add_percept("g", r, epoch)
    t = apply_tester(h, TesterSchedule.tested_tail(4, 2, 3))
    assert t.epochs() == [2, 3]
    assert epoch_reward_rate(t) == 0.5


def test_csv_round_trip_keeps_tested_rows():
    h = four_step((0, 1))
    sched = TesterSchedule((False, True, True, False))
    text = transcript_csv(h, sched)
    assert text.splitlines()[0] == "step,epoch,kind,symbol,reward,tested"
    back = read_transcript_csv(text)
    assert [(e.step, e.kind, e.reward) for e in back.entries] == [(1, "action", 0), (2, "percept", 1)]


schedules = st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(st.booleans(), min_size=n, max_size=n),
    st.lists(st.booleans(), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
))


def _history(rewards) -> History:
    h = History()
    for i, r in enumerate(rewards):
        if i % 2 == 0:
            h.add_percept(f"s{i}", r)
        else:
            h.add_action(f"a{i}")
    return h


@given(schedules)
def test_tester_idempotence_and_monotonicity(data):
    flags, extra, rewards = data
    h = _history(rewards)
    s = TesterSchedule(tuple(flags))
    full = apply_tester(h, TesterSchedule.classical(len(h)))
    assert full.filter(s) == apply_tester(h, s)
    bigger = TesterSchedule(tuple(a or b for a, b in zip(flags, extra)))
    assert bigger.covers(s)
    small, large = apply_tester(h, s).entries, apply_tester(h, bigger).entries
    assert set(small) <= set(large)
    assert [e for e in large if e in set(small)] == list(small)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=20), st.randoms())
def test_average_reward_permutation_invariant(rewards, rnd):
    def build(rs):
        h = History()
        for r in rs:
            h.add_percept("s", r)
            h.add_action("R")
        return apply_tester(h, TesterSchedule.classical(len(h)))

    shuffled = list(rewards)
    rnd.shuffle(shuffled)
    assert average_reward(build(rewards)) == average_reward(build(shuffled))
