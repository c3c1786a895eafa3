import sys

import numpy as np
import pytest

from synvolution.numeric import Rng


@pytest.fixture
def rng():
    return Rng(1234)


def crandn(rng, shape):
    return rng.normal(shape) + 1j * rng.normal(shape)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, detail = results[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {num:2d}  {detail}")
