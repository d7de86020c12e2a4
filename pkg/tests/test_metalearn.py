from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrl.metalearn import (
    EvalTable,
    MetaParamGrid,
    SeedPolicy,
    build_superposed_state,
    eval_bin,
    eval_config,
    grid_search,
    is_unimodal,
    linspace_axis,
    quantum_meta_opt,
    query_cap,
    single_axis,
    unimodal_search,
)
from qrl.quantum import QueryLedger


def test_grid_flat_index_order():
    grid = MetaParamGrid.from_dict({"gamma": [0.0, 0.5], "eta": [0.1, 0.2, 0.3]})
    assert grid.shape == (2, 3) and len(grid) == 6
    assert grid.config(4) == {"gamma": 0.5, "eta": 0.2}
    assert MetaParamGrid.from_dict({"gamma": [0.1]}).config(0) == {"gamma": 0.1, "eta": 1.0}


def test_grid_validation():
    with pytest.raises(ValueError):
        MetaParamGrid.from_dict({"gamma": [1.5]})
    with pytest.raises(ValueError):
        MetaParamGrid.from_dict({"temperature": [0.1]})
    with pytest.raises(ValueError):
        MetaParamGrid.from_dict({"gamma": []})


def test_linspace_axis_is_clean():
    assert linspace_axis(0.0, 1.0, 51)[1] == 0.02
    assert single_axis(MetaParamGrid.from_dict({"gamma": [0.0, 1.0], "eta": [1.0]})) == 0


def test_grid_search_examples():
    assert grid_search(EvalTable.from_values([0.1, 0.9, 0.3])) == (1, 3)
    assert grid_search(EvalTable.from_values([0.4] * 5))[0] == 0


def test_unimodal_peak_at_nine():
    vals = [i if i <= 9 else 18 - i for i in range(16)]
    table = EvalTable.from_values(vals)
    res = unimodal_search(table, audit=True)
    assert res.index == 9 and res.queries <= 8 and res.unimodal


def test_unimodal_boundaries():
    assert unimodal_search(EvalTable.from_values(range(10))).index == 9
    assert unimodal_search(EvalTable.from_values(range(10, 0, -1))).index == 0
    assert unimodal_search(EvalTable.from_values([1.0])).queries == 0


def test_audit_flags_bimodal():
    res = unimodal_search(EvalTable.from_values([0, 5, 0, 0, 0, 9, 0, 0]), audit=True)
    assert res.unimodal is False
    assert is_unimodal([1, 2, 2, 1]) is True
    assert is_unimodal([1, 1, 2, 1]) is False
    assert is_unimodal([1, 2, 2.001, 1], tol=0.0) is True
    assert is_unimodal([1.0, 0.5, 0.501, 0.4], tol=0.005) is True


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=200))
def test_unimodal_query_cap(values):
    res = unimodal_search(EvalTable.from_values(values))
    assert res.queries <= query_cap(len(values))


@st.composite
def strictly_unimodal(draw):
    n = draw(st.integers(1, 120))
    peak = draw(st.integers(0, n - 1))
    up = sorted(set(draw(st.lists(st.integers(0, 10**6), min_size=peak + 1, max_size=peak + 1))))
    while len(up) < peak + 1:
        up.append(up[-1] + 1)
    down = sorted(draw(st.lists(st.integers(-10**6, up[-1]), min_size=n - peak - 1, max_size=n - peak - 1)),
                  reverse=True)
    return up + down


@settings(max_examples=300, deadline=None)
@given(strictly_unimodal())
def test_unimodal_matches_grid_on_audited_tables(values):
    assert is_unimodal(values)
    a = unimodal_search(EvalTable.from_values(values))
    b = grid_search(EvalTable.from_values(values))
    assert a.index == b[0]


def test_eval_under_full_forgetting_is_near_random(ref):
    v = eval_config({"gamma": 1.0, "eta": 0.5}, ref, 30, 30, SeedPolicy(0, 64))
    assert v == pytest.approx(2 / 16, abs=0.025)


def test_eval_without_training_is_near_random(ref):
    for k in ({"gamma": 0.0, "eta": 1.0}, {"gamma": 0.3, "eta": 0.2}):
        assert eval_config(k, ref, 0, 30, SeedPolicy(0, 64)) == pytest.approx(2 / 16, abs=0.025)


def test_eval_is_deterministic(ref):
    k = {"gamma": 0.05, "eta": 0.7}
    assert eval_config(k, ref, 20, 20, SeedPolicy(3, 8)) == eval_config(k, ref, 20, 20, SeedPolicy(3, 8))
    grid = MetaParamGrid.from_dict({"gamma": [0.0, 0.1]})
    table = EvalTable.for_grid(grid, ref, 10, 10, SeedPolicy(1, 4))
    first = table[1]
    assert table[1] == first and table.query_count == 1
    assert table.provenance["replicates"] == 4


def test_learning_beats_forgetting(ref):
    seeds = SeedPolicy(0, 32)
    assert eval_config({"gamma": 0.0, "eta": 1.0}, ref, 30, 30, seeds) > \
        eval_config({"gamma": 1.0, "eta": 1.0}, ref, 30, 30, seeds) + 0.2


def test_quantum_meta_opt_random_permutations():
    for N in (64,):
        hits = 0
        for seed in range(200):
            vals = np.random.default_rng([N, seed]).permutation(N)
            res = quantum_meta_opt(EvalTable.from_values(vals), np.random.default_rng(seed))
            hits += res.index == int(np.argmax(vals))
            assert res.calls <= math.ceil(22.5 * math.sqrt(N))
            assert vals[res.index] >= res.thresholds[0]
        assert hits / 200 >= 0.5


def test_quantum_meta_opt_small_table_is_exact():
    led = QueryLedger()
    for seed in range(100):
        assert quantum_meta_opt(EvalTable.from_values([0.2, 0.7, 0.4]), np.random.default_rng(seed), ledger=led).index == 1
    assert led.oracle_calls > 0


def test_superposed_state_single_bin():
    st_ = build_superposed_state(EvalTable.from_values([0.51] * 8))
    assert np.allclose(st_.k_distribution(), 1 / 8, atol=1e-15)
    assert np.count_nonzero(st_.bin_distribution()) == 1
    assert st_.bin_distribution()[eval_bin(0.51)] == pytest.approx(1.0, abs=1e-12)


def test_superposed_state_k_register_uniform():
    n, shots = 12, 100_000
    st_ = build_superposed_state(EvalTable.from_values(np.linspace(0, 1, n)))
    counts = np.bincount(st_.measure_k(np.random.default_rng(0), shots), minlength=n)
    p = 1 / n
    assert np.all(np.abs(counts - shots * p) <= 3 * math.sqrt(shots * p * (1 - p)))


def test_post_select_max_bin_gives_argmax_set():
    vals = [0.1, 0.97, 0.5, 0.99, 0.3, 0.97]
    st_ = build_superposed_state(EvalTable.from_values(vals))
    top = max(st_.labels)
    post = st_.post_select(top)
    assert post.support() == {1, 3, 5}
    assert math.fsum(post.k_distribution()) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        st_.post_select(0)


def test_eval_bin_edges():
    assert eval_bin(0.0) == 0 and eval_bin(1.0) == 15 and eval_bin(0.0625) == 1
