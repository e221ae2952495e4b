import numpy as np
import pytest

from priceformation import Equilibrium, ModelParams, make_grid


@pytest.fixture
def sym():
    return ModelParams(1.0, 1.0, 0.4)


@pytest.fixture
def asym():
    return ModelParams(1.0, 2.0, 0.4)


@pytest.fixture
def sym_eq():
    return Equilibrium(0.0, 0.9375)


@pytest.fixture
def sym_grid(sym):
    return make_grid(sym, 801)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=int):
        ok, detail = RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
