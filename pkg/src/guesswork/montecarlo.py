"""Sampling estimates of multi-user guesswork beyond enumerable lengths.

Optimal single-user ranks of sampled words are computed combinatorially
for i.i.d. sources, so word lengths in the hundreds are feasible: the rank
of ``w`` is the number of words strictly more likely than ``w`` plus the
lexicographic position of ``w`` among the words exactly as likely.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UnsupportedModelError
from .sources import (
    CharacterSource,
    IidSource,
    MultiUserProblem,
    as_word,
    enumerate_distribution,
    enumeration_cap,
    sample_strings,
    word_index,
)
from .strategy import optimal_single_strategy

MAX_TYPE_CLASSES = 2_000_000
DEFAULT_BINS = 256
DEFAULT_BLOCK = 4096


class TypeRanker:
    """Exact optimal ranks for an i.i.d. source without enumerating ``A^k``.

    Words are grouped by how many characters they draw from each set of
    equally likely characters (a "type"); every word of a type has the same
    probability, and types are ordered by the same log-probability key the
    explicit enumeration sorts on, so both paths agree exactly.
    """

    def __init__(self, source: IidSource, k: int, max_classes: int = MAX_TYPE_CLASSES):
        if not isinstance(source, IidSource):
            raise UnsupportedModelError("type counting needs an i.i.d. source")
        G = source.group_values.size
        n_types = math.comb(k + G - 1, G - 1)
        if n_types > max_classes:
            raise UnsupportedModelError(
                f"{n_types} probability types for k={k}; limit is {max_classes}"
            )
        self.source = source
        self.k = k
        self.m = source.m
        sizes = [int(s) for s in source.group_sizes]
        self._sizes = sizes
        self._nonzero = sum(sizes)
        counts = np.array(list(_compositions(k, G)), dtype=np.int64).reshape(-1, G)
        keys = source.log_key(counts, np.zeros(len(counts), dtype=np.int64))
        order = np.lexsort((np.arange(len(keys)), -keys))
        counts, keys = counts[order], keys[order]
        fact = math.factorial
        kf = fact(k)
        mult = []
        for row in counts.tolist():
            c = kf
            for g, n in enumerate(row):
                c = c // fact(n) * sizes[g] ** n
            mult.append(c)
        # tie classes: runs of identical keys
        self._classes: dict[float, tuple[int, list]] = {}
        before = 0
        for key, run in itertools.groupby(zip(keys.tolist(), counts.tolist(), mult), key=lambda t: t[0]):
            members = [(tuple(c), n) for _, c, n in run]
            self._classes[key] = (before, members)
            before += sum(n for _, n in members)
        self.n_positive = before
        gid = source.group_of
        less = np.zeros((self.m, G), dtype=np.int64)
        for c in range(self.m):
            for c2 in range(c):
                if gid[c2] >= 0:
                    less[c, gid[c2]] += 1
        self._less = less.tolist()
        self._gid = gid.tolist()

    def rank(self, w) -> int:
        w = as_word(w, self.m)
        if len(w) != self.k:
            raise ConfigurationError(f"word length {len(w)} != {self.k}")
        gid = self._gid
        if any(gid[c] < 0 for c in w):
            return self.n_positive + self._zero_class_position(w) + 1
        G = len(self._sizes)
        counts = np.zeros((1, G), dtype=np.int64)
        for c in w:
            counts[0, gid[c]] += 1
        key = float(self.source.log_key(counts, np.zeros(1, dtype=np.int64))[0])
        before, members = self._classes[key]
        return before + sum(self._lex_below(w, c, n) for c, n in members) + 1

    def _lex_below(self, w, target, size) -> int:
        """Words with group counts ``target`` that precede ``w`` lexicographically."""
        r = list(target)
        F = size
        total = 0
        sizes = self._sizes
        for i, c in enumerate(w):
            R = self.k - i
            less = self._less[c]
            for g, cnt in enumerate(less):
                if cnt and r[g]:
                    total += cnt * (F * r[g] // (R * sizes[g]))
            h = self._gid[c]
            if h < 0 or r[h] == 0:
                break
            F = F * r[h] // (R * sizes[h])
            r[h] -= 1
        return total

    def _zero_class_position(self, w) -> int:
        """Position of ``w`` among words containing an impossible character."""
        below_all = word_index(w, self.m)
        nz = self._nonzero
        below_nz = 0
        for i, c in enumerate(w):
            ok = sum(1 for c2 in range(c) if self._gid[c2] >= 0)
            below_nz += ok * nz ** (self.k - i - 1)
            if self._gid[c] < 0:
                break
        return below_all - below_nz


def _compositions(k: int, G: int):
    for bars in itertools.combinations(range(k + G - 1), G - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(k + G - 2 - prev)
        yield out


@lru_cache(maxsize=32)
def _ranker(source: IidSource, k: int) -> TypeRanker:
    return TypeRanker(source, k)


def rank_by_type_counting(source: CharacterSource, w) -> int:
    """Optimal guessing rank of ``w`` computed from probability types."""
    if not isinstance(source, IidSource):
        raise UnsupportedModelError("type counting needs an i.i.d. source; enumerate Markov sources")
    w = as_word(w, source.m)
    return _ranker(source, len(w)).rank(w)


@dataclass(frozen=True)
class SimulationConfig:
    problem: MultiUserProblem
    strategy: str = "round_robin"
    trials: int = 100_000
    seed: int = 0
    alphas: tuple = (1.0,)
    bins: int = DEFAULT_BINS
    block: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.strategy not in ("round_robin", "g_opt"):
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.block < 1:
            raise ConfigurationError("block must be >= 1")


@dataclass
class EmpiricalSummary:
    """Empirical guesswork distribution from a simulation run.

    ``values``/``counts`` give the observed guess counts; ``bin_mass`` is the
    histogram of ``log(G)/k`` (nats) over ``bin_edges``.
    """

    strategy: str
    seed: int
    trials: int
    k: int
    m: int
    U: int
    V: int
    values: list
    counts: list
    bin_edges: list
    bin_mass: list
    moments: dict
    sandwich_violations: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return self.moments[1.0][0]

    def cdf(self, n) -> float:
        vals = np.array([float(v) for v in self.values])
        cum = np.cumsum(self.counts) / self.trials
        i = np.searchsorted(vals, float(n), side="right")
        return float(cum[i - 1]) if i else 0.0

    def ks_distance(self, pmf) -> float:
        """Kolmogorov distance between the empirical CDF and an exact PMF."""
        exact = pmf.cdf
        size = max(len(exact), int(max(self.values)))
        emp = np.zeros(size)
        for v, c in zip(self.values, self.counts):
            emp[int(v) - 1] += c
        emp = np.cumsum(emp) / self.trials
        ex = np.ones(size)
        ex[: len(exact)] = exact
        return float(np.max(np.abs(emp - ex)))

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "seed": self.seed,
            "trials": self.trials,
            "k": self.k,
            "m": self.m,
            "U": self.U,
            "V": self.V,
            "moments": {repr(float(a)): {"mean": m, "stderr": s} for a, (m, s) in self.moments.items()},
            "sandwich_violations": self.sandwich_violations,
            "values": [str(v) for v in self.values],
            "counts": list(self.counts),
            "bin_edges": self.bin_edges,
            "bin_mass": self.bin_mass,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        buf.write(f"# seed={self.seed} trials={self.trials} strategy={self.strategy}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "count", "mass", "cdf"])
        cum = 0
        for v, c in zip(self.values, self.counts):
            cum += c
            w.writerow([v, c, repr(float(c / self.trials)), repr(float(cum / self.trials))])
        return buf.getvalue() if fh is None else None

    def bins_to_csv(self, fh=None) -> str | None:
        buf = io.StringIO() if fh is None else fh
        buf.write(f"# seed={self.seed} trials={self.trials} strategy={self.strategy}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_lo", "x_hi", "mass"])
        for lo, hi, p in zip(self.bin_edges[:-1], self.bin_edges[1:], self.bin_mass):
            w.writerow([repr(float(lo)), repr(float(hi)), repr(float(p))])
        return buf.getvalue() if fh is None else None


class _UserSampler:
    def __init__(self, source: CharacterSource, k: int):
        self.source = source
        self.k = k
        n = source.m**k
        self.n_words = n
        if n <= enumeration_cap():
            dist = enumerate_distribution(source, k)
            self._probs = dist.probs
            self._ranks = optimal_single_strategy(dist).ranks
            self._ranker = None
        elif isinstance(source, IidSource):
            self._ranker = _ranker(source, k)
        else:
            raise UnsupportedModelError(
                f"Markov source with m**k = {n} beyond the enumeration cap"
            )

    def ranks(self, size: int, rng: np.random.Generator) -> list:
        if self._ranker is None:
            idx = rng.choice(self.n_words, size=size, p=self._probs)
            return self._ranks[idx].tolist()
        words = sample_strings(self.source, self.k, size, rng)
        return [self._ranker.rank(tuple(row)) for row in words.tolist()]


def _block_guesswork(samplers, U, seed, block, size):
    rng = np.random.default_rng([seed, block])
    per_user = [s.ranks(size, rng) for s in samplers]
    V = len(samplers)
    n_words = samplers[0].n_words
    gopt, rr = [], []
    for ranks in zip(*per_user):
        srt = sorted(ranks)
        gopt.append(srt[U - 1])
        idx = [(r - 1) * V + v + 1 for v, r in enumerate(ranks)]
        stop = sorted(idx)[U - 1]
        total = 0
        for v, s in enumerate(idx):
            n = min(s, stop)
            if n > v:
                total += min((n - v - 1) // V + 1, n_words)
        rr.append(total)
    return gopt, rr


def estimate_distribution(config: SimulationConfig, map_fn: Callable = map) -> EmpiricalSummary:
    """Simulate ``config.trials`` independent realizations.

    Trials run in blocks whose random streams derive from
    ``(seed, block index)``; ``map_fn`` may be an executor's ``map`` and the
    result does not depend on how blocks are scheduled.
    """
    p = config.problem
    samplers = [_UserSampler(s, p.k) for s in p.sources]
    n_blocks = -(-config.trials // config.block)
    sizes = [min(config.block, config.trials - b * config.block) for b in range(n_blocks)]
    results = list(
        map_fn(
            _block_guesswork,
            itertools.repeat(samplers),
            itertools.repeat(p.U),
            itertools.repeat(config.seed),
            range(n_blocks),
            sizes,
        )
    )
    gopt = [g for r in results for g in r[0]]
    rr = [g for r in results for g in r[1]]
    violations = sum(1 for a, b in zip(gopt, rr) if not a <= b <= p.V * a)
    sample = gopt if config.strategy == "g_opt" else rr

    vals, counts = np.unique(np.array(sample, dtype=object if _big(sample) else np.int64), return_counts=True)
    logs = np.array([math.log(g) for g in sample])
    edges = np.linspace(0.0, math.log(p.m), config.bins + 1)
    x = np.clip(logs / p.k, 0.0, edges[-1])
    hist, _ = np.histogram(x, bins=edges)
    moments = {}
    for a in config.alphas:
        powers = np.exp(float(a) * logs)
        se = float(np.std(powers, ddof=1) / math.sqrt(config.trials)) if config.trials > 1 else float("nan")
        moments[float(a)] = (float(np.mean(powers)), se)
    return EmpiricalSummary(
        strategy=config.strategy,
        seed=config.seed,
        trials=config.trials,
        k=p.k,
        m=p.m,
        U=p.U,
        V=p.V,
        values=[int(v) for v in vals],
        counts=[int(c) for c in counts],
        bin_edges=edges.tolist(),
        bin_mass=(hist / config.trials).tolist(),
        moments=moments,
        sandwich_violations=violations,
    )


def _big(sample) -> bool:
    return any(g > 2**62 for g in sample)


def dkw_epsilon(trials: int, confidence: float = 0.95) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band."""
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * trials))
