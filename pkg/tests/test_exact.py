import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import walk_queries
from guesswork.errors import DomainError, ResourceCapError
from guesswork.exact import (
    GuessworkPmf,
    g_opt_pmf,
    moment,
    order_stat_pmf,
    single_guesswork_pmf,
    stochastic_dominance,
    strategy_pmf_exhaustive,
)
from guesswork.sources import IidSource, MarkovSource, MultiUserProblem, enumerate_distribution
from guesswork.strategy import (
    optimal_single_strategy,
    random_strategy,
    round_robin_strategy,
    strategy_from_prefix,
)

U1 = IidSource([0.6, 0.25, 0.15])
U2 = IidSource([0.5, 0.4, 0.1])
BITS = IidSource([0.5, 0.5])
COUNTEREXAMPLE = MultiUserProblem([U1, U2], 1, 1)


def pmf_lists(max_len=4):
    return st.lists(st.floats(0.0, 1.0), min_size=1, max_size=max_len).filter(lambda xs: sum(xs) > 0.05).map(
        lambda xs: GuessworkPmf([x / sum(xs) for x in xs])
    )


def brute_order_stat(pmfs, U):
    """Enumerate every joint outcome of independent guess counts."""
    size = max(len(p) for p in pmfs)
    out = np.zeros(size)
    for combo in itertools.product(*[range(len(p)) for p in pmfs]):
        prob = np.prod([p.mass[i] for p, i in zip(pmfs, combo)])
        out[sorted(combo)[U - 1]] += prob
    return out


def brute_strategy_pmf(strategy, problem):
    dists = [enumerate_distribution(s, problem.k) for s in problem.sources]
    n = len(dists[0])
    table = strategy.table()
    out = np.zeros(table.size + 1)
    for words in itertools.product(range(n), repeat=problem.V):
        prob = np.prod([d.probs[w] for d, w in zip(dists, words)])
        out[walk_queries(table, words, problem.U)] += prob
    return np.trim_zeros(out[1:], "b")


def test_single_pmfs():
    assert single_guesswork_pmf(enumerate_distribution(BITS, 1)).mass.tolist() == [0.5, 0.5]
    assert single_guesswork_pmf(enumerate_distribution(U2, 1)).mass.tolist() == [0.5, 0.4, 0.1]
    bern = single_guesswork_pmf(enumerate_distribution(IidSource([0.25, 0.75]), 2))
    assert bern.mass == pytest.approx([0.5625, 0.1875, 0.1875, 0.0625], abs=1e-15)


def test_two_bits_order_statistic():
    half = GuessworkPmf([0.5, 0.5])
    assert order_stat_pmf([half, half], 2).mass.tolist() == [0.25, 0.75]
    assert order_stat_pmf([half, half], 1).mass.tolist() == [0.75, 0.25]
    assert g_opt_pmf(MultiUserProblem([BITS, BITS], 2, 1)).mass.tolist() == [0.25, 0.75]


def test_order_stat_identity():
    p = GuessworkPmf([0.1, 0.2, 0.7])
    assert order_stat_pmf([p], 1).mass == pytest.approx(p.mass, abs=1e-15)


@given(st.lists(pmf_lists(), min_size=1, max_size=4), st.data())
def test_order_stat_matches_joint_enumeration(pmfs, data):
    U = data.draw(st.integers(1, len(pmfs)))
    got = order_stat_pmf(pmfs, U).padded(max(len(p) for p in pmfs))
    assert got == pytest.approx(brute_order_stat(pmfs, U), abs=1e-12)


def test_order_stat_bad_u():
    with pytest.raises(DomainError):
        order_stat_pmf([GuessworkPmf([1.0])], 2)


def test_prefix_strategies_incomparable():
    a = strategy_pmf_exhaustive(strategy_from_prefix([(0, "0"), (0, "1")], 2, 3, 1), COUNTEREXAMPLE)
    b = strategy_pmf_exhaustive(strategy_from_prefix([(1, "0"), (1, "1")], 2, 3, 1), COUNTEREXAMPLE)
    assert a.cdf_at(1) == pytest.approx(0.6, abs=1e-12)
    assert a.cdf_at(2) == pytest.approx(0.85, abs=1e-12)
    assert b.cdf_at(1) == pytest.approx(0.5, abs=1e-12)
    assert b.cdf_at(2) == pytest.approx(0.9, abs=1e-12)
    verdict = stochastic_dominance(a, b)
    assert verdict.relation == "incomparable"
    assert 1 in verdict.b_violations and 2 in verdict.a_violations
    assert {1, 2} <= set(verdict.witnesses)


def test_single_user_exhaustive_equals_single_pmf():
    src = IidSource([0.2, 0.5, 0.3])
    d = enumerate_distribution(src, 2)
    s = optimal_single_strategy(d)
    p = MultiUserProblem([src], 1, 2)
    got = strategy_pmf_exhaustive(round_robin_strategy([s]), p)
    assert got.mass == pytest.approx(single_guesswork_pmf(d).mass, abs=1e-15)


INSTANCES = [
    MultiUserProblem([BITS, BITS], 1, 1),
    MultiUserProblem([U1, U2], 2, 1),
    MultiUserProblem([IidSource([0.7, 0.3]), BITS, IidSource([0.1, 0.9])], 2, 2),
    MultiUserProblem([MarkovSource.two_state(0.2, 0.6)] * 2, 1, 2),
]


@pytest.mark.parametrize("problem", INSTANCES)
def test_exhaustive_matches_query_walk(problem):
    rng = np.random.default_rng(99)
    m, k = problem.m, problem.k
    for _ in range(3):
        s = random_strategy(problem.V, m, k, rng)
        got = strategy_pmf_exhaustive(s, problem)
        ref = brute_strategy_pmf(s, problem)
        assert got.padded(len(ref)) == pytest.approx(np.pad(ref, (0, max(0, len(got) - len(ref)))), abs=1e-14)


@pytest.mark.parametrize("problem", INSTANCES)
def test_g_opt_dominates_random_strategies(problem):
    rng = np.random.default_rng(4)
    g = g_opt_pmf(problem)
    for _ in range(20):
        s = random_strategy(problem.V, problem.m, problem.k, rng)
        assert stochastic_dominance(g, strategy_pmf_exhaustive(s, problem)).relation in ("dominates", "equal")


def test_exhaustive_cap(monkeypatch):
    p = MultiUserProblem([BITS] * 3, 1, 4)
    s = random_strategy(3, 2, 4, np.random.default_rng(0))
    with pytest.raises(ResourceCapError):
        strategy_pmf_exhaustive(s, p, cap=100)
    monkeypatch.setenv("GUESSWORK_CAP", "10")
    with pytest.raises(ResourceCapError):
        strategy_pmf_exhaustive(s, p)


def test_dominance_relations():
    a = GuessworkPmf([0.5, 0.5])
    assert stochastic_dominance(a, a).relation == "equal"
    b = GuessworkPmf([0.25, 0.75])
    assert stochastic_dominance(a, b).relation == "dominates"
    assert stochastic_dominance(b, a).relation == "dominated_by"


@given(pmf_lists(5), pmf_lists(5))
def test_dominance_antisymmetry(a, b):
    ab, ba = stochastic_dominance(a, b), stochastic_dominance(b, a)
    assert ab.a_violations == ba.b_violations
    flip = {"dominates": "dominated_by", "dominated_by": "dominates"}
    assert ba.relation == flip.get(ab.relation, ab.relation)


def test_moments():
    assert moment(GuessworkPmf([0.5, 0.5]), 1) == 1.5
    assert moment(single_guesswork_pmf(enumerate_distribution(U1, 1)), 1) == pytest.approx(1.55, abs=1e-14)


@given(pmf_lists(6))
def test_moment_zero_and_csv(p):
    assert moment(p, 0) == pytest.approx(1.0, abs=1e-12)
    rows = p.to_csv().strip().splitlines()
    assert rows[0] == "n,mass,cdf" and len(rows) == len(p) + 1
    assert float(rows[-1].split(",")[2]) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("bad", [[], [0.5, 0.6], [-0.1, 1.1], [[0.5], [0.5]]])
def test_pmf_validation(bad):
    with pytest.raises(DomainError):
        GuessworkPmf(bad)
