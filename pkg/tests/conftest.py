import sys

import numpy as np
import pytest

from stablefield import ActionGeometry, StableFieldSpec, analyze_action


@pytest.fixture(scope="session")
def diagonal_group():
    """Quotient by the diagonal kernel ``<(1, 1)>`` in two dimensions."""
    return analyze_action(np.array([[1], [1]]))


@pytest.fixture(scope="session")
def diagonal_geometry(diagonal_group):
    return ActionGeometry(diagonal_group)


@pytest.fixture(scope="session")
def two_point_field():
    """``f(0) = 1``, ``f(1) = 1/2`` on ``Z``, alpha = 1."""
    return StableFieldSpec.dissipative(1.0, [0.0, 1.0, 0.5])


@pytest.fixture(scope="session")
def single_atom_field(diagonal_group):
    return StableFieldSpec.conservative(1.0, {diagonal_group.identity: 1.0}, diagonal_group)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
