import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def brute_probs(probs, k):
    """Word probabilities by plain iteration, lexicographic order."""
    out = []
    for w in itertools.product(range(len(probs)), repeat=k):
        p = 1.0
        for c in w:
            p *= probs[c]
        out.append(p)
    return out


def brute_markov(transition, initial, k):
    out = []
    m = len(initial)
    for w in itertools.product(range(m), repeat=k):
        p = Fraction(initial[w[0]])
        for a, b in zip(w, w[1:]):
            p *= Fraction(transition[a][b])
        out.append(float(p))
    return out


def walk_queries(table, words, U):
    """Play the schedule query by query; identified users get no more queries."""
    V, n = table.shape
    schedule = sorted((table[v, i], v, i) for v in range(V) for i in range(n))
    found, total = set(), 0
    for _, v, i in schedule:
        if v in found:
            continue
        total += 1
        if i == words[v]:
            found.add(v)
            if len(found) == U:
                return total
    raise AssertionError("schedule exhausted")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
