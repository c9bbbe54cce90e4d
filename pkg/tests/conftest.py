import numpy as np
import pytest

from effcond.canonical_rep import build_eigenbasis, extract_rep
from effcond.field_space import checkerboard, random_symmetric, stripes


@pytest.fixture(scope="session")
def cb8():
    return checkerboard(8)


@pytest.fixture(scope="session")
def stripes8():
    # phase 1 in rows {0, 1, 7}, mirror-symmetric about row 0, f = 3/8
    return stripes(8, [0, 1, 7])


@pytest.fixture(scope="session")
def rand8():
    return [random_symmetric(8, np.random.default_rng(s)) for s in range(6)]


@pytest.fixture(scope="session")
def full_reps(rand8):
    return [extract_rep(build_eigenbasis(g)) for g in rand8]


def random_pair(rng, scale=0.5, shift=2.5):
    """Random complex non-symmetric tensors with coercive Hermitian parts."""
    def one():
        t = scale * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        return t + shift * np.eye(2)
    return one(), one()


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str) -> bool:
    ok = bool(passed) and ACCEPTANCE.get(criterion, (True, ""))[0]
    ACCEPTANCE[criterion] = (ok, detail)
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
