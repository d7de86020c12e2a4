from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from qrl.environments import make_low_connectivity_maze, reference_maze

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def ref():
    return reference_maze()


@pytest.fixture
def corridor3():
    return make_low_connectivity_maze(3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def mazes_dir() -> Path:
    return ROOT / "mazes"


@pytest.fixture
def configs_dir() -> Path:
    return ROOT / "configs"


RARITY_SEEDS = 200


@pytest.fixture(scope="session")
def corridor_reports():
    """Matched-budget comparisons over the corridor family, shared by several tests."""
    import time

    from qrl.agents import PSAgent
    from qrl.hybrid import compare_budgeted, matched_budget

    out = {}
    for m in (3, 4, 5, 6):
        spec = make_low_connectivity_maze(m)
        t0 = time.perf_counter()
        report = compare_budgeted(PSAgent(), spec, matched_budget(spec, 200), range(RARITY_SEEDS))
        report.seconds = time.perf_counter() - t0
        out[m] = report
    return out


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
