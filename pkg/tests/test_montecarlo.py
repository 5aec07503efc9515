import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, strategies as st

from guesswork.errors import ConfigurationError, UnsupportedModelError
from guesswork.exact import g_opt_pmf, strategy_pmf_exhaustive
from guesswork.montecarlo import (
    SimulationConfig,
    TypeRanker,
    dkw_epsilon,
    estimate_distribution,
    rank_by_type_counting,
)
from guesswork.sources import (
    IidSource,
    MarkovSource,
    MultiUserProblem,
    enumerate_distribution,
    index_word,
    word_index,
)
from guesswork.strategy import optimal_single_strategy, round_robin_strategy

BERN = IidSource([0.25, 0.75])
BITS = IidSource([0.5, 0.5])
TWO_BITS = MultiUserProblem([BITS, BITS], 2, 1)
COUNTEREXAMPLE = MultiUserProblem([IidSource([0.6, 0.25, 0.15]), IidSource([0.5, 0.4, 0.1])], 1, 1)


def test_rank_examples():
    assert rank_by_type_counting(BERN, "10") == 3
    assert rank_by_type_counting(BERN, "1" * 50) == 1
    assert rank_by_type_counting(BERN, "0" * 50) == 2**50


def test_uniform_rank_is_lexicographic():
    src = IidSource([0.25] * 4)
    for i in (0, 1, 77, 4**6 - 1):
        assert rank_by_type_counting(src, index_word(i, 4, 6)) == i + 1


@given(
    st.lists(st.sampled_from([0.0, 1.0, 2.0, 3.0]), min_size=2, max_size=4).filter(lambda xs: sum(xs) > 0),
    st.integers(1, 5),
)
def test_type_counting_matches_enumeration(weights, k):
    probs = [w / sum(weights) for w in weights]
    src = IidSource(probs)
    s = optimal_single_strategy(enumerate_distribution(src, k))
    ranker = TypeRanker(src, k)
    for i in range(len(s.ranks)):
        assert ranker.rank(index_word(i, src.m, k)) == s.ranks[i]


def test_markov_unsupported():
    with pytest.raises(UnsupportedModelError):
        rank_by_type_counting(MarkovSource.two_state(0.2, 0.3), "01")


def test_two_bits_g_opt():
    s = estimate_distribution(SimulationConfig(TWO_BITS, "g_opt", 100_000, seed=11))
    sigma = np.sqrt(0.25 * 0.75 / 1e5)
    assert abs(s.cdf(1) - 0.25) < 3 * sigma
    assert s.ks_distance(g_opt_pmf(TWO_BITS)) <= dkw_epsilon(100_000)


def test_round_robin_mean_matches_exact():
    dists = [enumerate_distribution(x, 1) for x in COUNTEREXAMPLE.sources]
    rr = round_robin_strategy([optimal_single_strategy(d) for d in dists])
    exact = strategy_pmf_exhaustive(rr, COUNTEREXAMPLE)
    s = estimate_distribution(SimulationConfig(COUNTEREXAMPLE, "round_robin", 100_000, seed=5))
    stderr = s.moments[1.0][1]
    assert abs(s.mean - exact.mean) < 3 * stderr
    assert s.ks_distance(exact) <= dkw_epsilon(100_000)
    assert s.sandwich_violations == 0


def test_determinism_and_schedule_independence():
    cfg = SimulationConfig(COUNTEREXAMPLE, "round_robin", 20_000, seed=3, block=1000)
    a = estimate_distribution(cfg)
    b = estimate_distribution(cfg)
    assert a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    with ThreadPoolExecutor(4) as ex:
        c = estimate_distribution(cfg, map_fn=ex.map)
    assert c.to_json() == a.to_json()
    d = estimate_distribution(SimulationConfig(COUNTEREXAMPLE, "round_robin", 20_000, seed=4, block=1000))
    assert d.to_json() != a.to_json()


def test_long_strings_by_type_counting():
    p = MultiUserProblem([BERN] * 3, 2, 300)
    s = estimate_distribution(SimulationConfig(p, "round_robin", 2000, seed=1, alphas=(0.5, 1.0)))
    assert s.sandwich_violations == 0
    assert max(s.values) > 2**63  # ranks exceed machine integers
    assert sum(s.bin_mass) == pytest.approx(1.0)
    assert set(s.moments) == {0.5, 1.0}


def test_summary_outputs():
    s = estimate_distribution(SimulationConfig(TWO_BITS, "g_opt", 500, seed=2, bins=8))
    head, header, *rows = s.to_csv().strip().splitlines()
    assert head == "# seed=2 trials=500 strategy=g_opt"
    assert header == "n,count,mass,cdf"
    assert sum(int(r.split(",")[1]) for r in rows) == 500
    d = json.loads(s.to_json())
    assert d["seed"] == 2 and d["trials"] == 500
    assert len(s.bins_to_csv().strip().splitlines()) == 2 + 8


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SimulationConfig(TWO_BITS, "greedy")
    with pytest.raises(ConfigurationError):
        SimulationConfig(TWO_BITS, trials=0)


def test_dkw():
    assert dkw_epsilon(100_000) == pytest.approx(np.sqrt(np.log(40) / 2e5))
