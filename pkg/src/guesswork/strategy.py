"""Guessing strategies and the exact guess count of a realized word vector.

Users are indexed from 0. Ranks and query indices are guess counts and so
start at 1. A multi-user strategy maps (user, word) to the position of
that query in the inquisitor's schedule.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .sources import MultiUserProblem, StringDistribution, as_word, index_word, word_index


class SingleUserStrategy:
    """A bijection between ``A^k`` and ranks ``1..m**k``.

    ``order[r - 1]`` is the lexicographic index of the word guessed at rank
    ``r``; ``ranks[i]`` is the rank of the word with lexicographic index ``i``.
    """

    def __init__(self, order, m: int, k: int):
        order = np.asarray(order, dtype=np.int64)
        n = m**k
        if order.shape != (n,) or not np.array_equal(np.sort(order), np.arange(n)):
            raise DomainError("order must be a permutation of the word indices")
        ranks = np.empty(n, dtype=np.int64)
        ranks[order] = np.arange(1, n + 1)
        order.setflags(write=False)
        ranks.setflags(write=False)
        self.order = order
        self.ranks = ranks
        self.m = m
        self.k = k

    def __len__(self):
        return self.order.size

    def __eq__(self, other):
        return (
            isinstance(other, SingleUserStrategy)
            and (self.m, self.k) == (other.m, other.k)
            and np.array_equal(self.order, other.order)
        )

    def rank_of(self, w) -> int:
        w = as_word(w, self.m)
        if len(w) != self.k:
            raise DomainError(f"word of length {len(w)} outside A^{self.k}")
        return int(self.ranks[word_index(w, self.m)])

    def word_at(self, rank: int):
        if not 1 <= rank <= len(self):
            raise DomainError(f"rank {rank} outside 1..{len(self)}")
        return index_word(int(self.order[rank - 1]), self.m, self.k)


def optimal_single_strategy(dist: StringDistribution) -> SingleUserStrategy:
    """Guess from most to least likely; ties go to the lexicographically smaller word."""
    n = len(dist)
    order = np.lexsort((np.arange(n), -dist.keys))
    return SingleUserStrategy(order, dist.m, dist.k)


def rank_of(strategy: SingleUserStrategy, w) -> int:
    return strategy.rank_of(w)


def u_min(values: Sequence, U: int):
    """The ``U``-th smallest entry of ``values``, ties counted with multiplicity."""
    values = list(values)
    if not 1 <= U <= len(values):
        raise DomainError(f"U={U} must lie in [1, {len(values)}]")
    return sorted(values)[U - 1]


def g_opt(ranks: Sequence, U: int):
    """Guess count of the idealised bound that queries every user's n-th word at once."""
    return u_min(ranks, U)


class MultiUserStrategy:
    """Injective schedule of (user, word) queries.

    Subclasses provide ``index`` (vectorised over word indices) and
    ``queries_to_user`` (how many of the first ``n`` queries target user ``v``).
    """

    V: int
    m: int
    k: int

    @property
    def n_words(self) -> int:
        return self.m**self.k

    def index(self, v: int, word_indices):
        raise NotImplementedError

    def queries_to_user(self, v: int, n):
        raise NotImplementedError

    def query_index(self, v: int, w) -> int:
        """Position of the query (user ``v``, word ``w``) in the schedule."""
        w = as_word(w, self.m)
        return int(self.index(v, np.array([word_index(w, self.m)]))[0])

    def table(self) -> np.ndarray:
        """Explicit ``(V, m**k)`` array of query indices."""
        idx = np.arange(self.n_words)
        return np.stack([self.index(v, idx) for v in range(self.V)])


class ExplicitStrategy(MultiUserStrategy):
    def __init__(self, table, m: int, k: int):
        table = np.array(table, dtype=np.int64)
        n = m**k
        if table.ndim != 2 or table.shape[1] != n:
            raise ConfigurationError(f"table must have shape (V, {n})")
        total = table.size
        if not np.array_equal(np.sort(table, axis=None), np.arange(1, total + 1)):
            raise DomainError("strategy table is not a bijection onto 1..V*m**k")
        table.setflags(write=False)
        self._table = table
        self._sorted = np.sort(table, axis=1)
        self.V = table.shape[0]
        self.m = m
        self.k = k

    def index(self, v, word_indices):
        return self._table[v, word_indices]

    def queries_to_user(self, v, n):
        return np.searchsorted(self._sorted[v], n, side="right")

    def table(self):
        return self._table


class RoundRobinStrategy(MultiUserStrategy):
    """Interleave per-user strategies, one query per user per round.

    ``user_order`` lists users in the order they are visited within a round
    (default ``0..V-1``).
    """

    def __init__(self, strategies: Sequence[SingleUserStrategy], user_order=None):
        strategies = list(strategies)
        if not strategies:
            raise ConfigurationError("round-robin needs at least one strategy")
        dims = {(s.m, s.k) for s in strategies}
        if len(dims) != 1:
            raise ConfigurationError(f"strategies cover different word sets: {sorted(dims)}")
        self.strategies = strategies
        self.V = len(strategies)
        self.m, self.k = dims.pop()
        if user_order is None:
            user_order = range(self.V)
        user_order = list(user_order)
        if sorted(user_order) != list(range(self.V)):
            raise ConfigurationError("user_order must be a permutation of the users")
        pos = np.empty(self.V, dtype=np.int64)
        pos[user_order] = np.arange(1, self.V + 1)
        self.positions = pos

    def index(self, v, word_indices):
        return (self.strategies[v].ranks[word_indices] - 1) * self.V + self.positions[v]

    def queries_to_user(self, v, n):
        n = np.asarray(n)
        full = (n - self.positions[v]) // self.V + 1
        return np.clip(full, 0, self.n_words)


def round_robin_strategy(strategies, user_order=None) -> RoundRobinStrategy:
    return RoundRobinStrategy(strategies, user_order)


def round_robin_guesswork(ranks: Sequence[int], U: int, positions=None, n_words=None) -> int:
    """Round-robin guess count from per-user optimal ranks alone.

    Works with arbitrarily large Python integers, so it serves word lengths
    far beyond what can be enumerated.
    """
    V = len(ranks)
    if positions is None:
        positions = range(1, V + 1)
    idx = [(r - 1) * V + p for r, p in zip(ranks, positions)]
    stop = u_min(idx, U)
    total = 0
    for s, p in zip(idx, positions):
        n = min(s, stop)
        q = 0 if n < p else (n - p) // V + 1
        if n_words is not None:
            q = min(q, n_words)
        total += q
    return total


def random_strategy(V: int, m: int, k: int, rng: np.random.Generator) -> ExplicitStrategy:
    """Uniformly random injective schedule (seeded Fisher-Yates shuffle)."""
    n = V * m**k
    perm = np.arange(1, n + 1)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return ExplicitStrategy(perm.reshape(V, m**k), m, k)


def strategy_from_prefix(pairs, V: int, m: int, k: int) -> ExplicitStrategy:
    """Schedule the given (user, word) pairs first, then the rest by (user, word index)."""
    n = m**k
    table = np.zeros((V, n), dtype=np.int64)
    nxt = 1
    for v, w in pairs:
        i = word_index(as_word(w, m), m)
        if table[v, i]:
            raise DomainError(f"pair ({v}, {w!r}) scheduled twice")
        table[v, i] = nxt
        nxt += 1
    for v in range(V):
        for i in range(n):
            if not table[v, i]:
                table[v, i] = nxt
                nxt += 1
    return ExplicitStrategy(table, m, k)


@dataclass(frozen=True)
class GuessTrace:
    """Accounting of one realized word vector under a strategy.

    ``indices[v]`` is the query index of user ``v``'s word, ``ranks[v]`` the
    number of queries the schedule spends on ``v`` before reaching it,
    ``stop`` the query index at which the U-th word falls and
    ``user_queries[v]`` the queries actually made to ``v``.
    """

    words: tuple
    indices: tuple
    ranks: tuple
    stop: int
    user_queries: tuple
    total: int

    def to_json(self) -> str:
        d = asdict(self)
        d["words"] = ["".join(str(c) for c in w) for w in self.words]
        return json.dumps(d)


def total_guesswork(strategy: MultiUserStrategy, problem: MultiUserProblem | int, words) -> GuessTrace:
    """Queries made until ``U`` of the users' words are identified.

    Each user is queried until either their own word is hit or the ``U``-th
    word overall is hit, whichever happens first.
    """
    U = problem.U if isinstance(problem, MultiUserProblem) else int(problem)
    if len(words) != strategy.V:
        raise ConfigurationError(f"expected {strategy.V} words, got {len(words)}")
    words = tuple(as_word(w, strategy.m) for w in words)
    if any(len(w) != strategy.k for w in words):
        raise DomainError(f"all words must have length {strategy.k}")
    indices = tuple(strategy.query_index(v, w) for v, w in enumerate(words))
    stop = u_min(indices, U)
    ranks = tuple(int(strategy.queries_to_user(v, s)) for v, s in enumerate(indices))
    used = tuple(int(strategy.queries_to_user(v, min(s, stop))) for v, s in enumerate(indices))
    return GuessTrace(words, indices, ranks, stop, used, sum(used))
