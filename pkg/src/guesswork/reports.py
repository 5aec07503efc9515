"""Figure datasets and the built-in verification fixtures."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import asymptotics as asy
from .exact import (
    GuessworkPmf,
    g_opt_pmf,
    order_stat_pmf,
    single_guesswork_pmf,
    stochastic_dominance,
    strategy_pmf_exhaustive,
)
from .sources import IidSource, MarkovSource, MultiUserProblem, enumerate_distribution, index_word
from .strategy import (
    SingleUserStrategy,
    g_opt,
    optimal_single_strategy,
    random_strategy,
    round_robin_strategy,
    strategy_from_prefix,
    total_guesswork,
)

LN2 = asy.LN2

FIG1_PS = (0.1, 0.2, 0.3, 0.4, 0.5)
FIG1_EXCESS = tuple(range(9))
KEY_LENGTH = 168


def counterexample_sources():
    return IidSource([0.6, 0.25, 0.15]), IidSource([0.5, 0.4, 0.1])


def mismatched_sources():
    """A uniform-bit key on a byte alphabet and a skewed byte source."""
    bits = IidSource([0.5, 0.5] + [0.0] * 6)
    bytes_ = IidSource([0.55, 0.1, 0.1] + [0.05] * 5)
    return bits, bytes_


def fig1_left(ps=FIG1_PS, excess=FIG1_EXCESS):
    """Rows ``(p, V-U, exponent in bits)`` for Bernoulli(p) users."""
    rows = []
    for p in ps:
        curve = asy.renyi_curve(IidSource([1 - p, p]))
        for n in excess:
            rows.append((p, n, asy.avg_growth_exponent(curve, 1, n + 1, base=2)))
    return rows


def fig1_right(p=0.25, key_length=KEY_LENGTH, excess=FIG1_EXCESS):
    """Rows ``(V-U, exponent, log2 guesswork, guesswork)`` at the given key length."""
    curve = asy.renyi_curve(IidSource([1 - p, p]))
    rows = []
    for n in excess:
        e = asy.avg_growth_exponent(curve, 1, n + 1, base=2)
        rows.append((n, e, key_length * e, 2.0 ** (key_length * e)))
    return rows


def fig2(grid=asy.DEFAULT_GRID):
    """Single-user and one-of-two rate curves for the mismatched pair.

    Returns ``(rows, report)`` with rows ``(x, rate_bits, rate_bytes, I)``
    in bits.
    """
    bits, bytes_ = mismatched_sources()
    r1 = asy.rate_single(asy.Scgf(asy.renyi_curve(bits)), grid, label="bits")
    r2 = asy.rate_single(asy.Scgf(asy.renyi_curve(bytes_)), grid, label="bytes")
    multi = asy.rate_multi([r1, r2], U=1)
    rows = [
        (x / LN2, a / LN2, b / LN2, i / LN2)
        for x, a, b, i in zip(r1.x, r1.values, r2.values, multi.values)
    ]
    return rows, asy.convexity_report(multi)


def fig3(grid=99):
    """Rows ``(a, b, R(1/2) - R(1))`` in bits over an interior grid of (0, 1)^2."""
    pts = np.arange(1, grid + 1) / (grid + 1)
    rows = []
    for a in pts:
        for b in pts:
            gap = asy.renyi_markov_two_state(a, b, 0.5, 2) - asy.renyi_markov_two_state(a, b, 1.0, 2)
            rows.append((float(a), float(b), gap))
    return rows


# --------------------------------------------------------------------------
# verification fixtures


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _check(name):
    def deco(fn):
        def run(*args, **kw):
            t = time.perf_counter()
            try:
                ok, detail = fn(*args, **kw)
            except Exception as exc:  # a crashing fixture is a failed fixture
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            return Check(name, bool(ok), f"{detail} [{time.perf_counter() - t:.2f}s]")

        run.__name__ = fn.__name__
        return run

    return deco


def sweep_instances():
    """Small problems for exhaustive checks: m <= 3, k <= 2, V <= 3."""
    u1, u2 = counterexample_sources()
    b = lambda p: IidSource([1 - p, p])
    return [
        ([b(0.25), b(0.6)], 1),
        ([u1, u2], 1),
        ([b(0.25), b(0.4), b(0.5)], 2),
        ([u1, u2], 2),
        ([u1, u2, IidSource([0.2, 0.3, 0.5])], 2),
        ([u1, u2, u2], 1),
        ([MarkovSource.two_state(0.3, 0.1), b(0.25)], 2),
    ]


def dominance_sweep(n_strategies=100, seed=0):
    """Count CDF points where a random strategy beats the idealised bound."""
    rng = np.random.default_rng(seed)
    violations = 0
    checked = 0
    for sources, k in sweep_instances():
        m = sources[0].m
        dists = [enumerate_distribution(s, k) for s in sources]
        singles = [single_guesswork_pmf(d) for d in dists]
        for U in range(1, len(sources) + 1):
            problem = MultiUserProblem(sources, U, k)
            bound = order_stat_pmf(singles, U)
            for _ in range(n_strategies):
                strat = random_strategy(len(sources), m, k, rng)
                pmf = strategy_pmf_exhaustive(strat, problem, dists=dists)
                verdict = stochastic_dominance(bound, pmf)
                violations += len(verdict.a_violations)
                checked += 1
    return violations, checked


def sandwich_sweep():
    """Pointwise ``G_opt <= G_rr <= V * G_opt`` over every joint outcome."""
    import itertools

    violations = 0
    checked = 0
    for sources, k in sweep_instances():
        m = sources[0].m
        strategies = [optimal_single_strategy(enumerate_distribution(s, k)) for s in sources]
        rr = round_robin_strategy(strategies)
        V = len(sources)
        for U in range(1, V + 1):
            for joint in itertools.product(range(m**k), repeat=V):
                words = [index_word(i, m, k) for i in joint]
                ranks = [int(st.ranks[i]) for st, i in zip(strategies, joint)]
                lo = g_opt(ranks, U)
                g = total_guesswork(rr, U, words).total
                violations += not (lo <= g <= V * lo)
                checked += 1
    return violations, checked


@_check("most-likely-first ordering dominates")
def check_single_user_order(seed=0):
    rng = np.random.default_rng(seed)
    bad = 0
    for src, k in [(IidSource([0.25, 0.75]), 3), (counterexample_sources()[0], 2), (MarkovSource.two_state(0.3, 0.1), 3)]:
        d = enumerate_distribution(src, k)
        best = single_guesswork_pmf(d)
        for _ in range(50):
            other = single_guesswork_pmf(d, SingleUserStrategy(rng.permutation(len(d)), d.m, k))
            bad += stochastic_dominance(best, other).relation not in ("dominates", "equal")
    return bad == 0, f"{bad} random orderings not dominated"


@_check("round-robin with U = V equals the sum of individual ranks")
def check_all_users_sum():
    worst = 0.0
    for sources, k in sweep_instances():
        V = len(sources)
        dists = [enumerate_distribution(s, k) for s in sources]
        conv = np.array([1.0])
        for d in dists:
            conv = np.convolve(conv, single_guesswork_pmf(d).mass)
        conv = np.concatenate([[0.0] * (V - 1), conv])  # sum of V ranks starts at V
        strategies = [optimal_single_strategy(d) for d in dists]
        problem = MultiUserProblem(sources, V, k)
        for order in (None, list(reversed(range(V)))):
            pmf = strategy_pmf_exhaustive(round_robin_strategy(strategies, order), problem, dists=dists)
            size = max(len(pmf), conv.size)
            worst = max(worst, float(np.max(np.abs(pmf.padded(size) - np.pad(conv, (0, size - conv.size))))))
    return worst <= 1e-12, f"max |pmf - convolution| = {worst:.2e}"


def counterexample_cdfs():
    u1, u2 = counterexample_sources()
    problem = MultiUserProblem([u1, u2], 1, 1)
    a = strategy_pmf_exhaustive(strategy_from_prefix([(0, "0"), (0, "1")], 2, 3, 1), problem)
    b = strategy_pmf_exhaustive(strategy_from_prefix([(1, "0"), (1, "1")], 2, 3, 1), problem)
    return a, b


@_check("no dominant strategy when U < V")
def check_no_dominant_strategy():
    a, b = counterexample_cdfs()
    ca, cb = a.cdf[:2], b.cdf[:2]
    verdict = stochastic_dominance(a, b)
    ok = (
        np.allclose(ca, [0.6, 0.85], rtol=0, atol=1e-12)
        and np.allclose(cb, [0.5, 0.9], rtol=0, atol=1e-12)
        and verdict.relation == "incomparable"
    )
    return ok, f"A=({ca[0]:.12g}, {ca[1]:.12g}) B=({cb[0]:.12g}, {cb[1]:.12g}) {verdict.relation}"


@_check("two uniform bits, both identified")
def check_two_bits():
    bit = IidSource([0.5, 0.5])
    pmf = g_opt_pmf(MultiUserProblem([bit, bit], 2, 1))
    ok = np.allclose(pmf.mass, [0.25, 0.75], rtol=0, atol=1e-15)
    return ok, f"P(G_opt=n) = {pmf.mass.tolist()}"


@_check("G_opt dominates every strategy")
def check_g_opt_dominates(seed=0):
    bad, n = dominance_sweep(100, seed)
    return bad == 0, f"{bad} violations over {n} random strategies"


@_check("Round-robin sandwich G_opt <= G_rr <= V G_opt")
def check_sandwich():
    bad, n = sandwich_sweep()
    return bad == 0, f"{bad} violations over {n} outcomes"


def homogeneous_errors(grid=asy.DEFAULT_GRID):
    """Largest deviations of the assignment search from the identical-user closed forms."""
    pairs = [(1, 1), (1, 2), (2, 3), (3, 3)]
    out = {}
    for name, src in [("Bernoulli(0.25)", IidSource([0.75, 0.25])), ("Markov(0.3,0.1)", MarkovSource.two_state(0.3, 0.1))]:
        curve = asy.renyi_curve(src)
        scgf = asy.Scgf(curve)
        single = asy.rate_single(scgf, grid)
        rate_err = scgf_err = avg_err = 0.0
        alphas = np.linspace(-2.0, 3.0, 11)
        for U, V in pairs:
            multi = asy.rate_multi([single] * V, U)
            closed = asy.rate_homogeneous(single, U, V)
            fin = np.isfinite(closed)
            rate_err = max(rate_err, float(np.max(np.abs(multi.values[fin] - closed[fin]))))
            avg_err = max(avg_err, abs(asy.scgf_multi(multi, 1.0) - asy.avg_growth_exponent(curve, U, V)))
            scgf_err = max(
                scgf_err,
                float(np.max(np.abs(asy.scgf_multi(multi, alphas) - asy.scgf_homogeneous(scgf, U, V, alphas)))),
            )
        out[name] = (rate_err, avg_err, scgf_err)
    return out


@_check("identical users reduce to the closed forms")
def check_homogeneous():
    errs = homogeneous_errors()
    ok = all(r <= 1e-9 and a <= 1e-4 and s <= 1e-3 for r, a, s in errs.values())
    detail = "; ".join(f"{k}: rate {r:.1e}, mean {a:.1e}, scgf {s:.1e}" for k, (r, a, s) in errs.items())
    return ok, detail


@_check("diminishing returns down to the Shannon entropy")
def check_diminishing():
    bad = 0
    for p in FIG1_PS:
        curve = asy.renyi_curve(IidSource([1 - p, p]))
        e = np.array([asy.avg_growth_exponent(curve, 1, n + 1) for n in range(12)])
        inc = -np.diff(e)
        bad += np.any(inc < -1e-12) + np.any(np.diff(inc) > 1e-12) + np.any(e < curve.shannon - 1e-12)
    return bad == 0, f"{bad} sources violate monotonicity, convexity or the bound"


@_check("mismatched users give a nonconvex rate")
def check_mismatched():
    rows, report = fig2()
    arr = np.array(rows)
    fin = arr[:, 0] <= 1.0
    gap = float(np.max(np.abs(arr[fin, 3] - np.minimum(arr[fin, 1], arr[fin, 2]))))
    beyond = bool(np.all(np.isinf(arr[~fin, 3])))
    switch = any(s["from"] == (1,) and s["to"] == (0,) for s in report.switches)
    ok = gap <= 1e-6 and beyond and not report.convex and switch
    return ok, f"min-gap {gap:.1e}, inf beyond 1 bit: {beyond}, convex: {report.convex}, bytes->bits switch: {switch}"


@_check("PMF approximation on uniform sources")
def check_pmf_approx():
    worst = 0.0
    for m in (2, 3):
        single = asy.rate_single(asy.Scgf(asy.renyi_curve(IidSource([1 / m] * m))))
        for k in (1, 5, 12, 20):
            n = np.unique(np.geomspace(1, m**k, 200).astype(np.int64))
            approx = asy.pmf_approx(single, k, n)
            worst = max(worst, float(np.max(np.abs(approx * m**k - 1.0))))
    return worst <= 1e-12, f"max relative deviation from m**-k = {worst:.1e}"


@_check("Markov chain with a = b matches Bernoulli(a)")
def check_markov_bernoulli():
    worst = 0.0
    for p in (0.1, 0.25, 0.4):
        mk = asy.renyi_curve(MarkovSource.two_state(p, p))
        ii = asy.renyi_curve(IidSource([1 - p, p]))
        for beta in (0.25, 0.5, 2 / 3, 1.0, 2.0, math.inf):
            worst = max(worst, abs(mk(beta) - ii(beta)))
    return worst <= 1e-9, f"max difference {worst:.1e} nats"


ALL_CHECKS = (
    check_single_user_order,
    check_all_users_sum,
    check_no_dominant_strategy,
    check_two_bits,
    check_g_opt_dominates,
    check_sandwich,
    check_homogeneous,
    check_diminishing,
    check_mismatched,
    check_pmf_approx,
    check_markov_bernoulli,
)


def run_verification(seed: int = 0) -> list[Check]:
    out = []
    for chk in ALL_CHECKS:
        if chk in (check_single_user_order, check_g_opt_dominates):
            out.append(chk(seed=seed))
        else:
            out.append(chk())
    return out
