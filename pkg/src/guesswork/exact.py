"""Exact finite-length guesswork distributions and dominance checks."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, ResourceCapError
from .sources import MultiUserProblem, StringDistribution, enumerate_distribution
from .strategy import MultiUserStrategy, SingleUserStrategy, optimal_single_strategy

DEFAULT_EXHAUSTIVE_CAP = 2**20
DOMINANCE_TOL = 1e-12


class GuessworkPmf:
    """PMF of a guess count on the support ``1..N`` (``mass[0]`` is P(G=1))."""

    def __init__(self, mass):
        mass = np.array(mass, dtype=float)
        if mass.ndim != 1 or mass.size == 0:
            raise DomainError("mass must be a non-empty vector")
        if np.any(mass < 0):
            raise DomainError("negative probability mass")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise DomainError(f"masses sum to {mass.sum()!r}, not 1")
        mass.setflags(write=False)
        self.mass = mass

    def __len__(self):
        return self.mass.size

    def __repr__(self):
        return f"GuessworkPmf({self.mass.tolist()!r})"

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.mass)
        c.setflags(write=False)
        return c

    @property
    def support(self) -> np.ndarray:
        return np.arange(1, self.mass.size + 1)

    def pmf(self, n: int) -> float:
        return float(self.mass[n - 1]) if 1 <= n <= len(self) else 0.0

    def cdf_at(self, n: int) -> float:
        if n < 1:
            return 0.0
        return float(self.cdf[min(n, len(self)) - 1])

    def padded(self, size: int) -> np.ndarray:
        out = np.zeros(max(size, len(self)))
        out[: len(self)] = self.mass
        return out

    def moment(self, alpha: float) -> float:
        return moment(self, alpha)

    @property
    def mean(self) -> float:
        return moment(self, 1.0)

    def to_csv(self, fh=None) -> str | None:
        """Write ``n,mass,cdf`` rows; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "mass", "cdf"])
        for n, p, c in zip(self.support, self.mass, self.cdf):
            w.writerow([int(n), repr(float(p)), repr(float(c))])
        return buf.getvalue() if fh is None else None


def moment(pmf: GuessworkPmf, alpha: float) -> float:
    """E[G**alpha]."""
    n = pmf.support.astype(float)
    return float(np.sum(n**alpha * pmf.mass))


def single_guesswork_pmf(dist: StringDistribution, strategy: SingleUserStrategy | None = None) -> GuessworkPmf:
    """Guesswork PMF of one user; defaults to the optimal ordering."""
    if strategy is None:
        strategy = optimal_single_strategy(dist)
    return GuessworkPmf(dist.probs[strategy.order])


def order_stat_pmf(per_user: Sequence[GuessworkPmf], U: int) -> GuessworkPmf:
    """PMF of the ``U``-th smallest of independent guess counts.

    ``P(U-th smallest <= n)`` is the probability that at least ``U`` of the
    events ``{G_v <= n}`` occur, a Poisson-binomial tail evaluated for all
    ``n`` at once; differencing in ``n`` gives the PMF.
    """
    V = len(per_user)
    if not 1 <= U <= V:
        raise DomainError(f"U={U} must lie in [1, V={V}]")
    size = max(len(p) for p in per_user)
    cdfs = np.ones((V, size))
    for v, p in enumerate(per_user):
        cdfs[v, : len(p)] = p.cdf
    # dp[j, n] = P(exactly j of the users processed so far have G_v <= n)
    dp = np.zeros((V + 1, size))
    dp[0] = 1.0
    for v in range(V):
        f = cdfs[v]
        dp[1 : v + 2] = dp[1 : v + 2] * (1 - f) + dp[: v + 1] * f
        dp[0] = dp[0] * (1 - f)
    tail = dp[U:].sum(axis=0)
    tail[-1] = 1.0
    mass = np.diff(tail, prepend=0.0)
    return GuessworkPmf(np.clip(mass, 0.0, None))


def g_opt_pmf(problem: MultiUserProblem, cap: int | None = None) -> GuessworkPmf:
    dists = [enumerate_distribution(s, problem.k, cap) for s in problem.sources]
    return order_stat_pmf([single_guesswork_pmf(d) for d in dists], problem.U)


def strategy_pmf_exhaustive(
    strategy: MultiUserStrategy,
    problem: MultiUserProblem,
    cap: int | None = None,
    dists: Sequence[StringDistribution] | None = None,
) -> GuessworkPmf:
    """Exact PMF of the strategy's guess count over every joint outcome."""
    V, U = problem.V, problem.U
    n = problem.m**problem.k
    joint = n**V
    if cap is None:
        cap = int(os.environ.get("GUESSWORK_CAP", DEFAULT_EXHAUSTIVE_CAP))
    if joint > cap:
        raise ResourceCapError(
            f"(m**k)**V = {joint} joint outcomes exceed the exhaustive cap of {cap}", cap
        )
    if strategy.V != V or strategy.n_words != n:
        raise DomainError("strategy does not match the problem dimensions")
    if dists is None:
        dists = [enumerate_distribution(s, problem.k) for s in problem.sources]
    j = np.arange(joint, dtype=np.int64)
    prob = np.ones(joint)
    idx = np.empty((V, joint), dtype=np.int64)
    for v in range(V):
        w = (j // n ** (V - 1 - v)) % n
        prob *= dists[v].probs[w]
        idx[v] = strategy.index(v, w)
    stop = np.partition(idx, U - 1, axis=0)[U - 1]
    total = np.zeros(joint, dtype=np.int64)
    for v in range(V):
        total += strategy.queries_to_user(v, np.minimum(idx[v], stop))
    mass = np.bincount(total, weights=prob, minlength=V * n + 1)[1:]
    return GuessworkPmf(mass)


@dataclass(frozen=True)
class DominanceVerdict:
    """Outcome of comparing two guesswork CDFs.

    ``relation`` is from the first argument's point of view: ``"dominates"``
    means its CDF is pointwise at least the other's (fewer guesses).
    ``a_violations`` lists n where the first CDF falls below the second,
    ``b_violations`` the reverse.
    """

    relation: str
    a_violations: tuple
    b_violations: tuple

    @property
    def witnesses(self) -> tuple:
        return tuple(sorted(set(self.a_violations) | set(self.b_violations)))


def stochastic_dominance(a: GuessworkPmf, b: GuessworkPmf, tol: float = DOMINANCE_TOL) -> DominanceVerdict:
    size = max(len(a), len(b))
    ca = np.cumsum(a.padded(size))
    cb = np.cumsum(b.padded(size))
    n = np.arange(1, size + 1)
    a_bad = tuple(int(x) for x in n[ca < cb - tol])
    b_bad = tuple(int(x) for x in n[cb < ca - tol])
    if not a_bad and not b_bad:
        rel = "equal"
    elif not a_bad:
        rel = "dominates"
    elif not b_bad:
        rel = "dominated_by"
    else:
        rel = "incomparable"
    return DominanceVerdict(rel, a_bad, b_bad)
