"""Character sources and the string distributions they induce.

Two models are supported: i.i.d. characters drawn from a fixed PMF, and a
first-order Markov chain. Words are tuples of integers in ``range(m)``;
the string at lexicographic position ``i`` of ``A^k`` has the base-``m``
digits of ``i`` as characters, first character most significant.

Probabilities of a word are products of per-character factors. The factors
are sorted before being multiplied so that two words whose factor multisets
agree (for example permutations of each other under an i.i.d. model) get
bit-identical probabilities. Ranking depends on that: equal-probability
words must compare equal, not differ in the last ulp.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError, ResourceCapError

DEFAULT_ENUMERATION_CAP = 2**24
PROB_TOL = 1e-12
_CHUNK = 1 << 16

Word = tuple


def enumeration_cap(cap: int | None = None) -> int:
    """Resolve an enumeration cap, honouring ``GUESSWORK_CAP``."""
    if cap is not None:
        return int(cap)
    env = os.environ.get("GUESSWORK_CAP")
    if env:
        return int(env)
    return DEFAULT_ENUMERATION_CAP


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_pmf(p: np.ndarray, what: str) -> None:
    if p.ndim != 1 or p.size < 2:
        raise DomainError(f"{what} must be a vector over an alphabet of size >= 2")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise DomainError(f"{what} has negative or non-finite entries")
    if abs(p.sum() - 1.0) > PROB_TOL:
        raise DomainError(f"{what} sums to {p.sum()!r}, not 1")


class IidSource:
    """Characters drawn independently from ``probs``."""

    kind = "iid"

    def __init__(self, probs: Sequence[float]):
        p = _readonly(probs)
        _check_pmf(p, "probs")
        self.probs = p
        self.m = p.size
        # Characters sharing a probability value form one group; groups are
        # ordered by decreasing value, zero-probability characters excluded.
        values = np.unique(p[p > 0])[::-1]
        self.group_values = _readonly(values)
        self.group_logs = _readonly(np.log(values))
        gid = np.full(self.m, -1, dtype=np.int64)
        for g, v in enumerate(values):
            gid[p == v] = g
        gid.setflags(write=False)
        self.group_of = gid
        self.group_sizes = np.bincount(gid[gid >= 0], minlength=values.size)
        self.group_sizes.setflags(write=False)

    def __repr__(self):
        return f"IidSource(probs={self.probs.tolist()!r})"

    def __eq__(self, other):
        return isinstance(other, IidSource) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(("iid", self.probs.tobytes()))

    def _factors(self, digits: np.ndarray) -> np.ndarray:
        return self.probs[digits]

    def group_counts(self, digits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-row counts of each probability group and of zero characters."""
        gid = self.group_of[digits]
        counts = np.stack(
            [(gid == g).sum(axis=-1) for g in range(self.group_values.size)], axis=-1
        )
        zeros = (gid < 0).sum(axis=-1)
        return counts, zeros

    def log_key(self, counts: np.ndarray, zeros: np.ndarray) -> np.ndarray:
        """Log-probability from group counts, accumulated in a fixed order.

        Words with equal group counts always receive bit-identical keys.
        """
        counts = np.atleast_2d(counts)
        key = np.zeros(counts.shape[0])
        for g, lg in enumerate(self.group_logs):
            key = key + counts[:, g] * lg
        return np.where(np.atleast_1d(zeros) > 0, -np.inf, key)

    @property
    def min_entropy_char(self) -> float:
        return -math.log(self.probs.max())


class MarkovSource:
    """First-order Markov chain over ``range(m)``.

    ``initial`` defaults to the stationary distribution of ``transition``.
    """

    kind = "markov"

    def __init__(self, transition, initial: Sequence[float] | None = None):
        t = _readonly(transition)
        if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 2:
            raise DomainError("transition must be a square matrix of size >= 2")
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise DomainError("transition has negative or non-finite entries")
        rows = t.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > PROB_TOL):
            raise DomainError(f"transition rows must sum to 1, got {rows.tolist()}")
        self.transition = t
        self.m = t.shape[0]
        if initial is None:
            initial = stationary_distribution(t)
        p0 = _readonly(initial)
        if p0.size != self.m:
            raise ConfigurationError("initial distribution length differs from m")
        _check_pmf(p0, "initial")
        self.initial = p0

    @classmethod
    def two_state(cls, a: float, b: float, initial=None) -> "MarkovSource":
        """Chain with P(0->1) = a and P(1->0) = b."""
        if not (0 < a < 1 and 0 < b < 1):
            raise DomainError("two-state chain needs a, b in (0, 1)")
        return cls([[1 - a, a], [b, 1 - b]], initial)

    def __repr__(self):
        return (
            f"MarkovSource(transition={self.transition.tolist()!r}, "
            f"initial={self.initial.tolist()!r})"
        )

    def __eq__(self, other):
        return (
            isinstance(other, MarkovSource)
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.initial, other.initial)
        )

    def __hash__(self):
        return hash(("markov", self.transition.tobytes(), self.initial.tobytes()))

    def _factors(self, digits: np.ndarray) -> np.ndarray:
        first = self.initial[digits[:, :1]]
        if digits.shape[1] == 1:
            return first
        steps = self.transition[digits[:, :-1], digits[:, 1:]]
        return np.concatenate([first, steps], axis=1)


CharacterSource = Union[IidSource, MarkovSource]


def stationary_distribution(transition) -> np.ndarray:
    t = np.asarray(transition, dtype=float)
    m = t.shape[0]
    a = np.vstack([t.T - np.eye(m), np.ones(m)])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def as_word(w, m: int) -> Word:
    """Coerce ``w`` (digit string or integer sequence) to a word tuple."""
    if isinstance(w, str):
        try:
            chars = tuple(int(c, 36) for c in w)
        except ValueError:
            raise DomainError(f"cannot parse word {w!r}") from None
    else:
        chars = tuple(int(c) for c in w)
    if not chars:
        raise DomainError("words must have length >= 1")
    bad = [c for c in chars if not 0 <= c < m]
    if bad:
        raise DomainError(f"characters {bad} outside alphabet of size {m}")
    return chars


def word_index(w: Word, m: int) -> int:
    """Lexicographic position of ``w`` within ``A^k`` (0-based)."""
    idx = 0
    for c in w:
        idx = idx * m + c
    return idx


def index_word(idx: int, m: int, k: int) -> Word:
    out = []
    for _ in range(k):
        idx, c = divmod(idx, m)
        out.append(c)
    return tuple(reversed(out))


def _digits(indices: np.ndarray, m: int, k: int) -> np.ndarray:
    powers = m ** np.arange(k - 1, -1, -1, dtype=np.int64)
    return (indices[:, None] // powers[None, :]) % m


def _canonical_product(factors: np.ndarray) -> np.ndarray:
    f = np.sort(factors, axis=1)
    out = f[:, 0].copy()
    for j in range(1, f.shape[1]):
        out *= f[:, j]
    return out


def _canonical_log(factors: np.ndarray) -> np.ndarray:
    f = np.sort(factors, axis=1)
    with np.errstate(divide="ignore"):
        logs = np.log(f)
    out = logs[:, 0].copy()
    for j in range(1, f.shape[1]):
        out += logs[:, j]
    return out


def _digit_rows(source: CharacterSource, words) -> np.ndarray:
    rows = [as_word(w, source.m) for w in words]
    if len({len(r) for r in rows}) > 1:
        raise DomainError("words must share a common length")
    return np.array(rows, dtype=np.int64)


def string_probability(source: CharacterSource, w) -> float:
    """P(W_k = w) for the word ``w``."""
    digits = _digit_rows(source, [w])
    return float(_canonical_product(source._factors(digits))[0])


def log_string_probability(source: CharacterSource, w) -> float:
    """Natural log of P(W_k = w); ``-inf`` for impossible words."""
    digits = _digit_rows(source, [w])
    return float(_canonical_log(source._factors(digits))[0])


def ordering_key(source: CharacterSource, digits: np.ndarray) -> np.ndarray:
    """Key whose descending order is most-likely-first; ties are exact.

    For i.i.d. sources this is the log-probability computed from probability
    group counts, for Markov sources the canonical product itself.
    """
    if isinstance(source, IidSource):
        return source.log_key(*source.group_counts(digits))
    return _canonical_product(source._factors(digits))


@dataclass(frozen=True, eq=False)
class StringDistribution:
    """Probabilities of every word in ``A^k``, indexed lexicographically.

    ``keys`` orders words most-likely-first (descending); equal keys mean
    exactly tied probabilities.
    """

    m: int
    k: int
    probs: np.ndarray
    keys: np.ndarray

    def __len__(self):
        return self.probs.size

    @property
    def entries(self) -> Iterator[tuple[Word, float]]:
        for i, p in enumerate(self.probs):
            yield index_word(i, self.m, self.k), float(p)

    def as_dict(self) -> dict[str, float]:
        return {"".join(str(c) for c in w): p for w, p in self.entries}

    def probability(self, w) -> float:
        return float(self.probs[word_index(as_word(w, self.m), self.m)])


def enumerate_distribution(
    source: CharacterSource, k: int, cap: int | None = None
) -> StringDistribution:
    """All ``m**k`` words with their probabilities, zero-probability ones kept."""
    if k < 1:
        raise DomainError("k must be >= 1")
    cap = enumeration_cap(cap)
    n = source.m**k
    if n > cap:
        raise ResourceCapError(
            f"m**k = {source.m}**{k} = {n} exceeds the enumeration cap of {cap}", cap
        )
    probs = np.empty(n)
    keys = np.empty(n)
    for start in range(0, n, _CHUNK):
        idx = np.arange(start, min(n, start + _CHUNK), dtype=np.int64)
        digits = _digits(idx, source.m, k)
        probs[start : start + idx.size] = _canonical_product(source._factors(digits))
        keys[start : start + idx.size] = ordering_key(source, digits)
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise DomainError(f"enumerated distribution sums to {total!r}")
    probs.setflags(write=False)
    keys.setflags(write=False)
    return StringDistribution(source.m, k, probs, keys)


def sample_strings(
    source: CharacterSource, k: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` words as an integer array of shape ``(size, k)``."""
    if isinstance(source, IidSource):
        return rng.choice(source.m, size=(size, k), p=source.probs)
    out = np.empty((size, k), dtype=np.int64)
    out[:, 0] = rng.choice(source.m, size=size, p=source.initial)
    cum = np.cumsum(source.transition, axis=1)
    cum[:, -1] = 1.0
    for j in range(1, k):
        u = rng.random(size)
        out[:, j] = (u[:, None] > cum[out[:, j - 1]]).sum(axis=1)
    return out


def sample_string(source: CharacterSource, k: int, rng: np.random.Generator) -> Word:
    """Draw one word; the generator is the only state mutated."""
    return tuple(int(c) for c in sample_strings(source, k, 1, rng)[0])


def source_from_dict(desc: dict) -> CharacterSource:
    """Build a source from its JSON description.

    ``{"type": "iid", "m": 2, "probs": [...]}`` or
    ``{"type": "markov", "m": 2, "transition": [[...]], "initial": [...]}``
    (``initial`` optional).
    """
    kind = desc.get("type")
    if kind == "iid":
        src = IidSource(desc["probs"])
    elif kind == "markov":
        src = MarkovSource(desc["transition"], desc.get("initial"))
    else:
        raise ConfigurationError(f"unknown source type {kind!r}")
    if "m" in desc and desc["m"] != src.m:
        raise ConfigurationError(f"declared m={desc['m']} but source has {src.m} characters")
    return src


def source_to_dict(source: CharacterSource) -> dict:
    if isinstance(source, IidSource):
        return {"type": "iid", "m": source.m, "probs": source.probs.tolist()}
    return {
        "type": "markov",
        "m": source.m,
        "initial": source.initial.tolist(),
        "transition": source.transition.tolist(),
    }


def load_source(path) -> CharacterSource:
    with open(path) as fh:
        return source_from_dict(json.load(fh))


@dataclass(frozen=True)
class MultiUserProblem:
    """``V`` independent users, of whom ``U`` must be identified."""

    sources: tuple
    U: int
    k: int

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ConfigurationError("at least one source is required")
        if not 1 <= self.U <= len(self.sources):
            raise DomainError(f"U={self.U} must lie in [1, V={len(self.sources)}]")
        if self.k < 1:
            raise DomainError("k must be >= 1")
        if len({s.m for s in self.sources}) != 1:
            raise ConfigurationError("all users must share one alphabet")

    @property
    def V(self) -> int:
        return len(self.sources)

    @property
    def m(self) -> int:
        return self.sources[0].m

    @property
    def homogeneous(self) -> bool:
        first = self.sources[0]
        return all(s == first for s in self.sources[1:])
