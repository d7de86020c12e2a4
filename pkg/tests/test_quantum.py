from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrl.quantum import (
    LedgerError,
    NoSolutionError,
    PhaseOracle,
    QueryLedger,
    basis_state,
    bbht_search,
    check_normalized,
    dh_extremum,
    diffusion,
    grover_iterate,
    grover_search_known_k,
    grover_success_probability,
    marked_mass,
    norm,
    optimal_iterations,
    phase_oracle,
    uniform_state,
)


def _dense_grover_mass(N, marked_idx, j):
    # independent oracle: explicit matrices, no shared code with the simulator
    O = np.diag([-1.0 if i in marked_idx else 1.0 for i in range(N)])
    u = np.full((N, 1), 1 / math.sqrt(N))
    D = 2 * u @ u.T - np.eye(N)
    psi = np.linalg.matrix_power(D @ O, j) @ u
    return float(sum(psi[i, 0] ** 2 for i in marked_idx))


def test_identity_oracle():
    s = uniform_state(8)
    assert np.array_equal(phase_oracle(s, np.zeros(8, bool)), s)


def test_marked_basis_state_flips():
    marked = np.zeros(4, bool)
    marked[2] = True
    assert np.array_equal(phase_oracle(basis_state(4, 2), marked), -basis_state(4, 2))


def test_oracle_linearity():
    s = (basis_state(2, 0) + basis_state(2, 1)) / math.sqrt(2)
    out = phase_oracle(s, np.array([True, False]))
    assert np.allclose(out, np.array([-1, 1]) / math.sqrt(2), atol=1e-15)


def test_diffusion_fixed_point_and_involution():
    u = uniform_state(16)
    assert np.allclose(diffusion(u), u, atol=1e-12)
    rng = np.random.default_rng(0)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    v /= math.sqrt(norm(v))
    assert np.allclose(diffusion(diffusion(v)), v, atol=1e-12)


def test_single_step_on_four_items():
    marked = np.array([False, False, True, False])
    out = grover_iterate(uniform_state(4), PhaseOracle(marked))
    assert abs(out[2]) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_examples():
    assert grover_success_probability(1, 1, 4) == pytest.approx(1.0, abs=1e-15)
    assert grover_success_probability(0, 3, 16) == pytest.approx(3 / 16, abs=1e-15)
    assert grover_success_probability(3, 1, 16) == pytest.approx(math.sin(7 * math.asin(0.25)) ** 2)
    assert grover_success_probability(3, 1, 16) == pytest.approx(0.9613, abs=1e-4)
    assert grover_success_probability(5, 0, 16) == 0.0


@pytest.mark.parametrize("N, marked", [(4, {1}), (16, {0, 9}), (16, {3}), (32, {1, 2, 3, 4, 5})])
def test_simulation_matches_dense_oracle_and_formula(N, marked):
    mask = np.zeros(N, bool)
    mask[list(marked)] = True
    oracle = PhaseOracle(mask)
    state = uniform_state(N)
    for j in range(8):
        assert marked_mass(state, mask) == pytest.approx(_dense_grover_mass(N, marked, j), abs=1e-12)
        assert marked_mass(state, mask) == pytest.approx(grover_success_probability(j, len(marked), N), abs=1e-12)
        state = grover_iterate(state, oracle)


def test_optimal_iterations():
    assert optimal_iterations(2, 16) == 2
    assert optimal_iterations(1, 4) == 1
    assert optimal_iterations(4, 4) == 0
    # nearest-integer choice maximizes the closed form among neighbours
    for N in (16, 64, 256):
        for k in (1, 2, 3, 5):
            j = optimal_iterations(k, N)
            p = grover_success_probability(j, k, N)
            assert p >= grover_success_probability(j - 1, k, N) if j else True
            assert p >= grover_success_probability(j + 1, k, N)


def test_reference_known_k(ref):
    mask = ref.reward_mask
    rng = np.random.default_rng(3)
    hits, runs = 0, 4000
    for _ in range(runs):
        i, led = grover_search_known_k(PhaseOracle(mask), 2, rng)
        hits += mask[i]
        assert led.oracle_calls == 2
    p = grover_success_probability(2, 2, 16)
    assert p == pytest.approx(0.9453125, abs=1e-12)
    assert abs(hits / runs - p) < 4 * math.sqrt(p * (1 - p) / runs)


def test_known_k_certain_cases():
    rng = np.random.default_rng(4)
    mask = np.array([False, True, False, False])
    for _ in range(50):
        assert grover_search_known_k(PhaseOracle(mask), 1, rng)[0] == 1
    i, led = grover_search_known_k(PhaseOracle(np.ones(8, bool)), 8, rng)
    assert led.oracle_calls == 0
    with pytest.raises(NoSolutionError):
        grover_search_known_k(PhaseOracle(np.zeros(8, bool)), 0, rng)


def test_bbht_all_marked_first_round():
    out = bbht_search(PhaseOracle(np.ones(64, bool)), np.random.default_rng(0))
    assert (out.rounds, out.calls) == (1, 1)


@pytest.mark.parametrize("N", [4, 64, 1000])
def test_bbht_no_solution_spends_exact_cap(N):
    led = QueryLedger(M=3)
    out = bbht_search(PhaseOracle(np.zeros(N, bool)), np.random.default_rng(N), led)
    cap = math.ceil(30 * math.sqrt(N))
    assert out.index is None and out.calls == cap == led.oracle_calls
    assert led.interaction_steps == 6 * cap


def test_bbht_returns_marked_items():
    rng = np.random.default_rng(5)
    mask = np.zeros(256, bool)
    mask[[17, 200]] = True
    for _ in range(50):
        out = bbht_search(PhaseOracle(mask), rng)
        assert out.index in (17, 200)


def test_dh_small_min():
    for seed in range(50):
        assert dh_extremum([3, 1, 2], "min", np.random.default_rng(seed)).index == 1
        assert dh_extremum([3, 1, 2], "max", np.random.default_rng(seed)).index == 0


def test_dh_constant_table_keeps_initial_guess():
    for seed in range(20):
        res = dh_extremum([0.5] * 10, "min", np.random.default_rng(seed))
        assert res.index == int(np.random.default_rng(seed).integers(10))
        assert len(res.thresholds) == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=40), st.integers(0, 2**32 - 1), st.sampled_from(["min", "max"]))
def test_dh_thresholds_monotone_and_budget(values, seed, mode):
    res = dh_extremum(values, mode, np.random.default_rng(seed))
    t = res.thresholds
    if mode == "min":
        assert all(b < a for a, b in zip(t, t[1:]))
    else:
        assert all(b > a for a, b in zip(t, t[1:]))
    assert res.calls <= math.ceil(22.5 * math.sqrt(len(values)))
    assert res.ledger.oracle_calls == res.calls


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 7), st.data())
def test_norm_preserved(n_bits, data):
    N = 2**n_bits
    marked = np.array(data.draw(st.lists(st.booleans(), min_size=N, max_size=N)))
    state = uniform_state(N)
    for _ in range(data.draw(st.integers(0, 10))):
        state = grover_iterate(state, PhaseOracle(marked))
        check_normalized(state)


def test_check_normalized_rejects():
    with pytest.raises(ValueError):
        check_normalized(np.ones(4, complex))


def test_ledger_identity():
    led = QueryLedger(M=7)
    for _ in range(5):
        led.charge_oracle()
    assert led.interaction_steps == 70
    led.charge_epochs(3)
    assert led.interaction_steps == 70 + 21
    led.interaction_steps += 1
    with pytest.raises(LedgerError):
        led.check()
