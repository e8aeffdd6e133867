import os
import sys
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DOCUMENTS = os.path.join(REPO, "demos", "documents")

# rational 2x2 system used throughout the worked examples
PAIR_A = [[Fr(-8, 45), Fr(1, 30)], [Fr(-1, 45), Fr(-1, 10)]]
PAIR_B = [[2], [1]]
PAIR_C = [[3, 4]]


@pytest.fixture
def pair():
    from tscontrol import LinearSystem
    return LinearSystem(PAIR_A, PAIR_B, PAIR_C)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {text}")
