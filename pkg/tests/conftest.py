from __future__ import annotations

import importlib.util
import os
import shutil
from pathlib import Path

import numpy as np
import pytest

from merroute.cli import resolve_scenario
from merroute.scenario import make_scenario

# Fixed catalog of travel-time matrices (entries in {1,2,3}) used by the
# exhaustive checks; mixes symmetric, asymmetric and non-metric cases.
T_CATALOG = [
    [[0, 1], [1, 0]],
    [[0, 2], [2, 0]],
    [[0, 3], [3, 0]],
    [[0, 1], [3, 0]],
    [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
    [[0, 2, 3], [2, 0, 1], [3, 1, 0]],
    [[0, 3, 3], [3, 0, 3], [3, 3, 0]],
    [[0, 1, 3], [1, 0, 1], [3, 1, 0]],
    [[0, 1, 2], [3, 0, 1], [2, 2, 0]],
    [[0, 2, 1], [1, 0, 2], [3, 3, 0]],
    [[0, 3, 1], [2, 0, 2], [1, 3, 0]],
]


def random_scenario(seed: int, max_nodes: int = 4, max_spans: int = 8, max_mers: int = 2):
    """Random tiny restoration scenario inside the oracle size guard."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes + 1))
    d = int(rng.integers(3, max_spans + 1))
    m = int(rng.integers(1, max_mers + 1))
    tt = rng.integers(1, 4, size=(n, n))
    np.fill_diagonal(tt, 0)
    islands, free = [], list(range(n))
    rng.shuffle(free)
    for _ in range(int(rng.integers(1, n + 1))):
        if not free:
            break
        members = [free.pop()]
        if free and rng.random() < 0.3:
            members.append(free.pop())
        repair = int(rng.integers(1, d + 2))
        islands.append((sorted(members), None if repair > d else repair))
    loads = rng.integers(0, 5, size=n) * 25.0
    weights = rng.choice([1.0, 2.0], size=n)
    starts = [int(s) for s in rng.integers(0, n, size=m)]
    cost = float(rng.choice([0.3, 1.0, 5.0]))
    return make_scenario(
        tt, num_spans=d, islands=islands, loads=list(loads), weights=list(weights),
        initial_nodes=starts, travel_cost=cost, name=f"random{seed}",
    )


def find_cbc() -> str | None:
    """A CBC executable from PATH or from the pulp wheel, if either exists."""
    exe = shutil.which("cbc")
    if exe:
        return exe
    spec = importlib.util.find_spec("pulp")
    if spec is None or spec.origin is None:
        return None
    cand = Path(spec.origin).parent / "solverdir" / "cbc" / "linux" / "i64" / "cbc"
    return str(cand) if cand.is_file() and os.access(cand, os.X_OK) else None


@pytest.fixture(scope="session")
def tiny():
    return resolve_scenario("builtin:tiny")


@pytest.fixture(scope="session")
def feeder():
    return resolve_scenario("builtin:feeder37")


@pytest.fixture
def cbc_exe():
    exe = find_cbc()
    if exe is None:
        pytest.skip("no CBC executable available")
    return exe


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
