"""Long-string asymptotics of single- and multi-user guesswork.

Everything is computed in natural logarithms; pass ``base=2`` (or convert
with :data:`LN2`) for bits. Key objects:

* :class:`RenyiCurve` -- specific Renyi entropy ``R(beta)`` of a source.
* :class:`Scgf` -- growth rate of guesswork moments, ``alpha -> Lambda(alpha)``.
* :class:`RateCurve` -- a rate function sampled on ``x in [0, log m]``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, DomainError, NumericError
from .sources import CharacterSource, IidSource, MarkovSource, stationary_distribution

LN2 = math.log(2.0)
SHANNON_GUARD = 1e-6
DEFAULT_GRID = 2048
DEFAULT_ALPHA_MAX = 64.0
GOLDEN_TOL = 1e-10
POWER_TOL = 1e-14
CONVEXITY_TOL = 1e-8

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _in_base(value, base):
    if base is None or base == math.e:
        return value
    return value / math.log(base)


# --------------------------------------------------------------------------
# Renyi entropy


class RenyiCurve:
    """Specific Renyi entropy of a character source, in nats.

    Subclasses implement ``log_power_sum(beta)``, the per-character growth
    rate of ``log sum_w P(w)**beta``; ``R(beta)`` is that divided by
    ``1 - beta``.
    """

    m: int
    shannon: float
    min_entropy: float
    max_entropy: float

    def log_power_sum(self, beta):
        raise NotImplementedError

    def __call__(self, beta):
        b = np.asarray(beta, dtype=float)
        if np.any(~(b > 0)):
            raise DomainError("beta must be > 0")
        out = np.empty(b.shape)
        inf = np.isinf(b)
        near = np.abs(b - 1.0) < SHANNON_GUARD
        rest = ~(inf | near)
        out[inf] = self.min_entropy
        out[near] = self.shannon
        if rest.any():
            out[rest] = self.log_power_sum(b[rest]) / (1.0 - b[rest])
        return float(out) if out.ndim == 0 else out

    def scgf(self) -> "Scgf":
        return Scgf(self)


class IidRenyi(RenyiCurve):
    def __init__(self, source: IidSource):
        p = source.probs[source.probs > 0]
        self.m = source.m
        self._logp = np.log(p)
        self.shannon = float(-np.sum(p * self._logp))
        self.min_entropy = float(-self._logp.max())
        self.max_entropy = math.log(p.size)

    def log_power_sum(self, beta):
        b = np.asarray(beta, dtype=float)
        return logsumexp(b[..., None] * self._logp, axis=-1)


def _reachability(adj: np.ndarray) -> np.ndarray:
    m = adj.shape[0]
    reach = adj | np.eye(m, dtype=bool)
    for _ in range(m.bit_length() + 1):
        reach = (reach.astype(int) @ reach.astype(int)) > 0
    return reach


def max_cycle_mean(weights: np.ndarray) -> float:
    """Largest mean edge weight over cycles (Karp); ``-inf`` marks no edge."""
    m = weights.shape[0]
    d = np.full((m + 1, m), -np.inf)
    d[0] = 0.0
    for k in range(1, m + 1):
        d[k] = np.max(d[k - 1][:, None] + weights, axis=0)
    best = -np.inf
    for v in range(m):
        if not np.isfinite(d[m, v]):
            continue
        ks = np.arange(m)
        ok = np.isfinite(d[:m, v])
        best = max(best, np.min((d[m, v] - d[:m, v][ok]) / (m - ks[ok])))
    return float(best)


class MarkovRenyi(RenyiCurve):
    """Renyi curve of an irreducible chain via the Perron root of ``T**beta``.

    Weights are rebalanced by max-plus potentials so that every tilted
    matrix has entries in ``[0, 1]`` and spectral radius in ``[1, m]``;
    this keeps large ``beta`` free of overflow and underflow.
    """

    def __init__(self, source: MarkovSource, tol: float = POWER_TOL, max_iter: int = 200_000):
        t = source.transition
        adj = t > 0
        if not _reachability(adj).all():
            raise DomainError("transition matrix is reducible")
        self.m = source.m
        self.tol = tol
        self.max_iter = max_iter
        with np.errstate(divide="ignore"):
            w = np.log(t)
        c = max_cycle_mean(w)
        pot = np.zeros(self.m)
        for _ in range(self.m + 1):
            pot = np.maximum(pot, np.max(pot[:, None] + w - c, axis=0))
        self._cycle_mean = c
        self._reweighted = np.minimum(w - c + pot[:, None] - pot[None, :], 0.0)
        pi = stationary_distribution(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(adj, t * w, 0.0)
        self.shannon = float(-np.sum(pi[:, None] * plogp))
        self.min_entropy = -c
        self.max_entropy = float(self.log_power_sum(np.array([0.0]))[0])

    def log_power_sum(self, beta):
        b = np.atleast_1d(np.asarray(beta, dtype=float))
        with np.errstate(invalid="ignore"):
            mats = np.exp(b[:, None, None] * self._reweighted[None])
        mats = np.where(np.isfinite(self._reweighted)[None], mats, 0.0)
        rho = perron_root(mats, self.tol, self.max_iter)
        out = b * self._cycle_mean + np.log(rho)
        return out.reshape(np.shape(beta))


SQUARING_MAX_M = 32


def perron_root(mats: np.ndarray, tol: float = POWER_TOL, max_iter: int = 200_000) -> np.ndarray:
    """Spectral radius of a batch of nonnegative irreducible matrices.

    Works on ``A = M + I``, which is primitive even when ``M`` is periodic;
    its Perron root exceeds that of ``M`` by exactly one. For a positive
    vector ``x`` the Collatz-Wielandt ratios ``(Ax)_i / x_i`` bracket the
    root, and iteration stops once the bracket has relative width ``tol``.
    Small matrices get ``x = A**(2**j) 1`` by repeated squaring, larger
    ones plain power iteration.
    """
    mats = np.asarray(mats, dtype=float)
    batch, m, _ = mats.shape
    shifted = mats + np.eye(m)[None]
    lam = np.empty(batch)
    active = np.arange(batch)
    x = np.ones((batch, m))
    power = shifted.copy() if m <= SQUARING_MAX_M else None
    steps = 64 if power is not None else max_iter
    for _ in range(steps):
        a = shifted[active]
        y = np.einsum("bij,bj->bi", a, x[active])
        ratio = y / x[active]
        lo, hi = ratio.min(axis=1), ratio.max(axis=1)
        done = hi - lo <= tol * lo
        lam[active] = 0.5 * (lo + hi)
        if power is None:
            x[active] = y / y.max(axis=1, keepdims=True)
        else:
            p = power[active]
            p = np.einsum("bij,bjk->bik", p, p)
            p /= p.max(axis=(1, 2), keepdims=True)
            power[active] = p
            x[active] = p.sum(axis=2)
        active = active[~done]
        if active.size == 0:
            return lam - 1.0
    raise NumericError(f"Perron root did not converge in {steps} steps")


def renyi_curve(source: CharacterSource) -> RenyiCurve:
    if isinstance(source, IidSource):
        return IidRenyi(source)
    return MarkovRenyi(source)


def renyi_iid(source: IidSource, beta, base=None):
    """Renyi entropy of the character PMF; ``beta=1`` Shannon, ``inf`` min-entropy."""
    return _in_base(IidRenyi(source)(beta), base)


def renyi_markov(source: MarkovSource, beta, base=None):
    return _in_base(MarkovRenyi(source)(beta), base)


def renyi_markov_two_state(a: float, b: float, beta: float, base=None) -> float:
    """Closed form for the chain ``[[1-a, a], [b, 1-b]]`` (cross-check path)."""
    if abs(beta - 1.0) < SHANNON_GUARD:
        h = lambda q: -q * math.log(q) - (1 - q) * math.log(1 - q)
        val = b / (a + b) * h(a) + a / (a + b) * h(b)
    else:
        s, t = (1 - a) ** beta, (1 - b) ** beta
        lam = (s + t + math.sqrt((s - t) ** 2 + 4 * (a * b) ** beta)) / 2
        val = math.log(lam) / (1 - beta)
    return _in_base(val, base)


# --------------------------------------------------------------------------
# scaled cumulant generating functions


class Scgf:
    """``Lambda(alpha) = alpha * R(1/(1+alpha))`` for ``alpha > -1``, else ``-R(inf)``."""

    def __init__(self, curve: RenyiCurve):
        self.curve = curve

    def __call__(self, alpha):
        a = np.asarray(alpha, dtype=float)
        out = np.full(a.shape, -self.curve.min_entropy)
        live = a > -1.0
        if live.any():
            al = a[live]
            # (1 + alpha) * log_power_sum(beta) avoids dividing by 1 - beta
            out[live] = (1.0 + al) * self.curve.log_power_sum(1.0 / (1.0 + al))
            out[live & (a == 0)] = 0.0
        return float(out) if out.ndim == 0 else out


def scgf_single(curve: RenyiCurve, alpha):
    return Scgf(curve)(alpha)


# --------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True, eq=False)
class RateCurve:
    """Rate function sampled on a grid of ``x`` (nats), ``inf`` where infinite.

    ``support_edge`` is the largest ``x`` with a finite rate; ``shannon`` is
    the zero of single-user curves. ``assignments`` (multi-user curves only)
    holds, per grid point, the users identified at that scale: the pivot
    first, then the others whose words have already fallen.
    """

    x: np.ndarray
    values: np.ndarray
    support_edge: float
    shannon: float | None = None
    assignments: tuple | None = None
    label: str = ""

    def __len__(self):
        return self.x.size

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.values)

    @property
    def zero_point(self) -> float:
        return float(self.x[np.argmin(self.values)])

    def at(self, x):
        """Linear interpolation; beyond the support edge the rate is ``inf``.

        Between the last finite grid point and the edge the left-limit
        (last finite) value is used.
        """
        xa = np.asarray(x, dtype=float)
        xq = np.clip(xa, self.x[0], self.x[-1])
        fin = self.finite
        xf, vf = self.x[fin], self.values[fin]
        out = np.interp(xq, xf, vf)
        out = np.where(xa > self.support_edge * (1 + 1e-12) + 1e-15, np.inf, out)
        return float(out) if out.ndim == 0 else out

    def in_base(self, base) -> "RateCurve":
        f = 1.0 / math.log(base)
        return replace(
            self,
            x=self.x * f,
            values=self.values * f,
            support_edge=self.support_edge * f,
            shannon=None if self.shannon is None else self.shannon * f,
        )

    def to_csv(self, fh=None, base=None) -> str | None:
        curve = self if base is None else self.in_base(base)
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "value"])
        for x, v in zip(curve.x, curve.values):
            w.writerow([repr(float(x)), format_value(v)])
        return buf.getvalue() if fh is None else None


def format_value(v) -> str:
    return "inf" if np.isposinf(v) else repr(float(v))


def rate_grid(m: int, n: int = DEFAULT_GRID) -> np.ndarray:
    return np.linspace(0.0, math.log(m), n)


def legendre_transform(
    scgf: Scgf,
    x,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    tol: float = GOLDEN_TOL,
):
    """``sup_alpha (x*alpha - Lambda(alpha))`` at each ``x``.

    For ``x >= 0`` the objective is nondecreasing on ``alpha <= -1`` (Lambda
    is flat there), so the search runs over ``[-1, alpha_max]`` by golden
    section on the concave objective, with both endpoints checked. Points
    beyond the largest attainable exponent ``R(0+)`` are ``inf``.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise DomainError("rate functions are defined for x >= 0")
    edge = scgf.curve.max_entropy
    live = xs <= edge * (1 + 1e-12) + 1e-15
    out = np.full(xs.shape, np.inf)
    xl = xs[live]
    if xl.size:
        f = lambda a: xl * a - scgf(a)
        lo = np.full(xl.shape, -1.0)
        hi = np.full(xl.shape, float(alpha_max))
        c = hi - _INVPHI * (hi - lo)
        d = lo + _INVPHI * (hi - lo)
        fc, fd = f(c), f(d)
        for _ in range(400):
            if np.max(hi - lo) <= tol:
                break
            left = fc >= fd
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
            nc = hi - _INVPHI * (hi - lo)
            nd = lo + _INVPHI * (hi - lo)
            c_new = np.where(left, nc, d)
            d_new = np.where(left, c, nd)
            fc_new = np.where(left, f(nc), fd)
            fd_new = np.where(left, fc, f(nd))
            c, d, fc, fd = c_new, d_new, fc_new, fd_new
        else:
            raise NumericError("golden-section search did not converge")
        best = np.maximum.reduce([fc, fd, f(lo), f(hi), f(np.full(xl.shape, -1.0)), f(np.full(xl.shape, float(alpha_max)))])
        if not np.all(np.isfinite(best)):
            bad = xl[~np.isfinite(best)]
            raise NumericError(f"non-finite transform at x = {bad[:5].tolist()}")
        out[live] = best
    return float(out[0]) if np.ndim(x) == 0 else out


def rate_single(
    scgf: Scgf,
    grid: int | np.ndarray = DEFAULT_GRID,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    label: str = "",
) -> RateCurve:
    """Rate function of one user's guesswork on ``[0, log m]``."""
    x = rate_grid(scgf.curve.m, grid) if np.isscalar(grid) else np.asarray(grid, dtype=float)
    vals = legendre_transform(scgf, x, alpha_max)
    vals = np.maximum(vals, 0.0)
    vals.setflags(write=False)
    x.setflags(write=False)
    return RateCurve(x, vals, scgf.curve.max_entropy, scgf.curve.shannon, label=label)


def delta_gamma(rate: RateCurve, shannon: float | None = None) -> tuple[RateCurve, RateCurve]:
    """Split a rate curve at the Shannon entropy.

    ``delta`` keeps the part left of it (user already identified), ``gamma``
    the part right of it (user not yet identified); elsewhere each is 0.
    """
    h = rate.shannon if shannon is None else shannon
    if h is None:
        raise ConfigurationError("a Shannon entropy is required")
    d = np.where(rate.x <= h, rate.values, 0.0)
    g = np.where(rate.x >= h, rate.values, 0.0)
    return (
        replace(rate, values=d, support_edge=float(rate.x[-1]), label=f"delta {rate.label}".strip()),
        replace(rate, values=g, label=f"gamma {rate.label}".strip()),
    )


def rate_multi(rates: Sequence[RateCurve], U: int, shannons: Sequence[float] | None = None) -> RateCurve:
    """Rate function of the U-th smallest of V users' log-guesswork.

    For each ``x`` it minimises, over the pivot user (whose word falls at
    scale ``x``) and the choice of ``U - 1`` users already identified, the
    pivot's rate plus ``delta`` of the identified users plus ``gamma`` of
    the rest. Contributions are separable, so for a fixed pivot the best
    identified set is the ``U - 1`` users with smallest ``delta - gamma``.
    """
    V = len(rates)
    if not 1 <= U <= V:
        raise DomainError(f"U={U} must lie in [1, V={V}]")
    x = rates[0].x
    for r in rates[1:]:
        if r.x.shape != x.shape or not np.allclose(r.x, x, rtol=0, atol=1e-12):
            raise ConfigurationError("rate curves must share a grid")
    if shannons is None:
        shannons = [r.shannon for r in rates]
    if any(h is None for h in shannons):
        raise ConfigurationError("every rate curve needs a Shannon entropy")
    lam = np.stack([r.values for r in rates])
    dg = [delta_gamma(r, h) for r, h in zip(rates, shannons)]
    delta = np.stack([d.values for d, _ in dg])
    gamma = np.stack([g.values for _, g in dg])
    with np.errstate(invalid="ignore"):
        pref = delta - gamma
    cols = np.arange(x.size)
    best = np.full(x.size, np.inf)
    best_sets = np.zeros((x.size, U), dtype=np.int64)
    for pivot in range(V):
        others = np.array([v for v in range(V) if v != pivot], dtype=np.int64)
        total = lam[pivot].copy()
        chosen = np.empty((0, x.size), dtype=np.int64)
        if others.size:
            order = others[np.argsort(pref[others], axis=0, kind="stable")]
            chosen = order[: U - 1]
            rest = order[U - 1 :]
            total = total + delta[chosen, cols].sum(axis=0) + gamma[rest, cols].sum(axis=0)
        better = total < best
        best = np.where(better, total, best)
        sets = np.vstack([np.full((1, x.size), pivot), chosen]).T
        best_sets[better] = sets[better]
    edges = sorted((r.support_edge for r in rates), reverse=True)
    best.setflags(write=False)
    assignments = tuple(
        (int(s[0]),) + tuple(sorted(int(u) for u in s[1:])) if np.isfinite(b) else None
        for s, b in zip(best_sets, best)
    )
    return RateCurve(x, best, edges[V - U], None, assignments, label=f"U={U},V={V}")


def rate_homogeneous(rate: RateCurve, U: int, V: int) -> np.ndarray:
    """Closed form for identical users: ``U*I`` left of the entropy, ``(V-U+1)*I`` right."""
    return np.where(rate.x <= rate.shannon, U * rate.values, (V - U + 1) * rate.values)


def scgf_multi(rate: RateCurve, alpha):
    """``sup_x (alpha*x - I(x))`` over the finite part of the grid."""
    a = np.atleast_1d(np.asarray(alpha, dtype=float))
    fin = rate.finite
    xs, vs = rate.x[fin], rate.values[fin]
    out = np.max(a[:, None] * xs[None, :] - vs[None, :], axis=1)
    return float(out[0]) if np.ndim(alpha) == 0 else out


def scgf_homogeneous(scgf: Scgf, U: int, V: int, alpha):
    """Closed form of the multi-user sCGF for identical users."""
    a = np.asarray(alpha, dtype=float)
    n = V - U + 1
    out = np.where(a <= 0, U * scgf(a / U), n * scgf(a / n))
    return float(out) if out.ndim == 0 else out


def avg_growth_exponent(curve: RenyiCurve, U: int, V: int, base=None) -> float:
    """Growth rate of the mean guesswork for identical users: ``R((V-U+1)/(V-U+2))``."""
    if not 1 <= U <= V:
        raise DomainError(f"U={U} must lie in [1, V={V}]")
    n = V - U
    return _in_base(curve((n + 1) / (n + 2)), base)


def convex_hull_rate(rate: RateCurve, alphas=None) -> np.ndarray:
    """Transform of the transform: the lower convex envelope of the finite region."""
    if alphas is None:
        alphas = np.linspace(-64.0, 64.0, 8193)
    lam = scgf_multi(rate, alphas)
    return np.max(alphas[None, :] * rate.x[:, None] - lam[None, :], axis=1)


@dataclass
class ConvexityReport:
    convex: bool
    min_second_difference: float
    witness: tuple | None = None
    identified: tuple | None = None
    switches: list = field(default_factory=list)

    def to_dict(self, base=None) -> dict:
        f = 1.0 if base is None else 1.0 / math.log(base)
        return {
            "convex": self.convex,
            "min_second_difference": self.min_second_difference * f,
            "witness_x": None if self.witness is None else [w * f for w in self.witness],
            "switches": [
                {"x": s["x"] * f, "from": list(s["from"]), "to": list(s["to"])}
                for s in self.switches
            ],
        }


def convexity_report(rate: RateCurve, tol: float = CONVEXITY_TOL) -> ConvexityReport:
    """Discrete convexity test on the finite part of a rate curve.

    When the curve carries assignments, the report also lists every grid
    point where the set of identified users changes.
    """
    idx = np.flatnonzero(rate.finite)
    v = rate.values[idx]
    if v.size < 3:
        return ConvexityReport(True, 0.0)
    d2 = v[:-2] - 2 * v[1:-1] + v[2:]
    j = int(np.argmin(d2))
    convex = bool(d2[j] >= -tol)
    witness = None if convex else tuple(float(rate.x[idx[j + i]]) for i in range(3))
    switches = []
    if rate.assignments is not None:
        prev = None
        for i in idx:
            cur = rate.assignments[i]
            if prev is not None and cur is not None and set(cur) != set(prev):
                switches.append({"x": float(rate.x[i]), "from": prev, "to": cur})
            prev = cur
    return ConvexityReport(convex, float(d2[j]), witness, rate.assignments, switches)


def pmf_approx(rate: RateCurve, k: int, n):
    """``P(G = n) ~ exp(-k I(log(n)/k)) / n``; an infinite rate gives 0."""
    nn = np.asarray(n, dtype=float)
    if np.any(nn < 1):
        raise DomainError("guess index must be >= 1")
    logn = np.log(nn)
    i = np.asarray(rate.at(logn / k))
    with np.errstate(invalid="ignore", over="ignore"):
        out = np.where(np.isinf(i), 0.0, np.exp(-logn - k * np.where(np.isinf(i), 0.0, i)))
    return float(out) if out.ndim == 0 else out
