import math

import numpy as np
import pytest


def brute_force_quad(theta, alpha, beta):
    """Joint probabilities by explicit two-qubit state-vector contraction.

    Builds cos(theta)|HH> + sin(theta)|VV> with np.kron and projects onto
    product analyzer states; shares no code with the library.
    """
    h = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    psi = math.cos(theta) * np.kron(h, h) + math.sin(theta) * np.kron(v, v)

    def outcome_states(g):
        plus = math.cos(g) * h + math.sin(g) * v
        minus = -math.sin(g) * h + math.cos(g) * v
        return plus, minus

    ap, am = outcome_states(alpha)
    bp, bm = outcome_states(beta)
    return np.array([
        np.dot(np.kron(a, b), psi) ** 2 for a, b in ((ap, bp), (ap, bm), (am, bp), (am, bm))
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from tests_support import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
