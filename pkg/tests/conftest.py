from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Example functions shared by the suites, as (expression, m, n).
EXAMPLES = {
    "adm": ("frob2(X)*(frob2(X) - 2*det(X))", 2, 2),
    "det_squared": ("(det(X))^2", 2, 2),
    "double_well": ("frob2(X - I)*frob2(X + I)", 2, 2),
    "eps_double_well": ("frob2(X - [[1, 1/2], [0, 1]])*frob2(X - [[1, -1/2], [0, 1]])", 2, 2),
    "quad_well": ("frob2(X - I)*frob2(X - [[-1, 0], [0, 1]])"
                  "*frob2(X - [[1, 0], [0, -1]])*frob2(X + I)", 2, 2),
    "scalar_double_well_3d": ("(frob2(X) - 1)^2", 3, 3),
}


@pytest.fixture(scope="session")
def examples():
    from polycert.expr import parse_expression
    from polycert.poly_core import VarSpace

    return {name: parse_expression(src, VarSpace(m, n)) for name, (src, m, n) in EXAMPLES.items()}


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(test_acceptance.RESULTS):
        terminalreporter.write_line(test_acceptance.RESULTS[n])
