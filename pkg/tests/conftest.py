import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rotperm import PlanConfig, NormalModelConfig, generate_normal  # noqa: E402

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def plan():
    return PlanConfig(num_occasions=5, clusters_per_occasion=36, replaced_per_occasion=6, cluster_size=5)


@pytest.fixture
def small_plan():
    return PlanConfig(num_occasions=3, clusters_per_occasion=6, replaced_per_occasion=2, cluster_size=3)


@pytest.fixture
def null_sample(plan):
    return generate_normal(NormalModelConfig([8.0] * 5, 1.0, 1.0, 2.0, plan, seed=11))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
