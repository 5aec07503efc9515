"""Command-line front end.

Exit codes: 0 ok, 1 verification failure, 2 configuration error,
3 numeric error, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import asymptotics as asy
from . import reports
from .errors import ConfigurationError, DomainError, NumericError, ResourceCapError, UnsupportedModelError
from .exact import g_opt_pmf, single_guesswork_pmf, strategy_pmf_exhaustive
from .montecarlo import SimulationConfig, estimate_distribution
from .sources import MultiUserProblem, enumerate_distribution, source_from_dict
from .strategy import optimal_single_strategy, round_robin_strategy

log = logging.getLogger("guesswork")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CAP = 0, 1, 2, 3, 4

_SOURCE = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["iid", "markov"]},
        "m": {"type": "integer", "minimum": 2},
        "probs": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
        "initial": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2},
        "transition": {
            "type": "array",
            "minItems": 2,
            "items": {"type": "array", "items": {"type": "number", "minimum": 0}},
        },
    },
    "allOf": [
        {"if": {"properties": {"type": {"const": "iid"}}}, "then": {"required": ["probs"]}},
        {"if": {"properties": {"type": {"const": "markov"}}}, "then": {"required": ["transition"]}},
    ],
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "sources": {"type": "array", "items": _SOURCE, "minItems": 1},
        "source": _SOURCE,
        "V": {"type": "integer", "minimum": 1},
        "U": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 1},
        "key_length": {"type": "integer", "minimum": 1},
        "grid": {"type": "integer", "minimum": 3},
        "alpha_max": {"type": "number", "exclusiveMinimum": 0},
        "alphas": {"type": "array", "items": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
        "trials": {"type": "integer", "minimum": 1},
        "strategy": {"enum": ["round_robin", "g_opt"]},
        "user_order": {"type": "array", "items": {"type": "integer", "minimum": 0}},
    },
    "required": ["U"],
    "oneOf": [
        {"required": ["sources"], "not": {"required": ["source"]}},
        {"required": ["source", "V"], "not": {"required": ["sources"]}},
    ],
}


class ProblemConfig:
    """Validated JSON problem description."""

    def __init__(self, raw: dict):
        errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw), key=str)
        if errors:
            lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
            raise ConfigurationError("invalid config:\n  " + "\n  ".join(lines))
        self.raw = raw
        if "sources" in raw:
            self.sources = [source_from_dict(s) for s in raw["sources"]]
        else:
            self.sources = [source_from_dict(raw["source"])] * raw["V"]
        self.U = raw["U"]
        if self.U > len(self.sources):
            raise ConfigurationError(f"U={self.U} exceeds V={len(self.sources)}")
        self.k = raw.get("k", 1)
        self.key_length = raw.get("key_length", reports.KEY_LENGTH)
        self.grid = raw.get("grid", asy.DEFAULT_GRID)
        self.alpha_max = raw.get("alpha_max", asy.DEFAULT_ALPHA_MAX)
        self.alphas = tuple(raw.get("alphas", [1.0]))
        self.seed = raw.get("seed")
        self.trials = raw.get("trials", 100_000)
        self.strategy = raw.get("strategy", "round_robin")
        self.user_order = raw.get("user_order")
        self.problem = MultiUserProblem(self.sources, self.U, self.k)

    @classmethod
    def load(cls, path) -> "ProblemConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        return cls(raw)


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def _fmt(v) -> str:
    return asy.format_value(v)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_analyze(cfg: ProblemConfig, out: Path, base: float, grid: int | None = None) -> dict:
    grid = grid or cfg.grid
    scale = 1.0 / math.log(base)
    curves = [asy.renyi_curve(s) for s in cfg.sources]
    scgfs = [asy.Scgf(c) for c in curves]
    singles = [asy.rate_single(s, grid, cfg.alpha_max, label=f"user{v}") for v, s in enumerate(scgfs)]
    multi = asy.rate_multi(singles, cfg.U)
    report = asy.convexity_report(multi)
    V = len(cfg.sources)

    betas = np.concatenate([np.geomspace(0.05, 20.0, 120), [1.0]])
    betas = np.unique(betas)
    fh, w = _writer(out / "renyi.csv")
    with fh:
        w.writerow(["beta"] + [f"R_user{v}" for v in range(V)])
        for b in list(betas) + [math.inf]:
            w.writerow([_fmt(b)] + [repr(float(c(b)) * scale) for c in curves])

    alphas = np.linspace(-3.0, 5.0, 161)
    lam_multi = asy.scgf_multi(multi, alphas)
    fh, w = _writer(out / "scgf.csv")
    with fh:
        w.writerow(["alpha"] + [f"scgf_user{v}" for v in range(V)] + ["scgf_multi"])
        cols = [s(alphas) for s in scgfs]
        for i, a in enumerate(alphas):
            w.writerow([repr(float(a))] + [repr(float(c[i]) * scale) for c in cols] + [repr(float(lam_multi[i]) * scale)])

    for v, r in enumerate(singles):
        with open(out / f"rate_user{v}.csv", "w", newline="") as fh:
            r.to_csv(fh, base)
    fh, w = _writer(out / "rate_multi.csv")
    with fh:
        w.writerow(["x", "value", "identified"])
        for x, val, who in zip(multi.x, multi.values, multi.assignments):
            w.writerow([repr(float(x) * scale), _fmt(val * scale), "" if who is None else " ".join(map(str, who))])
    _write_json(out / "convexity.json", report.to_dict(base))

    exponent = asy.scgf_multi(multi, 1.0) * scale
    summary = {
        "U": cfg.U,
        "V": V,
        "units": "bits" if base == 2 else "nats",
        "shannon": [c.shannon * scale for c in curves],
        "min_entropy": [c.min_entropy * scale for c in curves],
        "growth_exponent": exponent,
        "homogeneous": cfg.problem.homogeneous,
        "key_length": cfg.key_length,
        "convex": report.convex,
    }
    if cfg.problem.homogeneous:
        exponent = asy.avg_growth_exponent(curves[0], cfg.U, V) * scale
        summary["homogeneous_exponent"] = exponent
    summary["log2_avg_guesswork"] = cfg.key_length * exponent / scale / math.log(2)
    summary["avg_guesswork"] = 2.0 ** summary["log2_avg_guesswork"]
    _write_json(out / "summary.json", summary)
    return summary


def cmd_exact(cfg: ProblemConfig, out: Path) -> dict:
    p = cfg.problem
    dists = [enumerate_distribution(s, p.k) for s in p.sources]
    singles = [single_guesswork_pmf(d) for d in dists]
    for v, pmf in enumerate(singles):
        (out / f"single_user{v}.csv").write_text(pmf.to_csv())
    gopt = g_opt_pmf(p)
    (out / "gopt.csv").write_text(gopt.to_csv())
    summary = {"U": p.U, "V": p.V, "k": p.k, "gopt_mean": gopt.mean, "single_means": [s.mean for s in singles]}
    rr = round_robin_strategy([optimal_single_strategy(d) for d in dists], cfg.user_order)
    try:
        pmf = strategy_pmf_exhaustive(rr, p, dists=dists)
    except ResourceCapError as exc:
        log.warning("round-robin distribution skipped: %s", exc)
        summary["round_robin"] = f"skipped: {exc}"
    else:
        (out / "round_robin.csv").write_text(pmf.to_csv())
        summary["round_robin_mean"] = pmf.mean
    _write_json(out / "summary.json", summary)
    return summary


def cmd_simulate(cfg: ProblemConfig, out: Path, seed: int | None = None) -> dict:
    seed = seed if seed is not None else cfg.seed
    if seed is None:
        raise ConfigurationError("simulate needs a seed (config 'seed' or --seed)")
    sc = SimulationConfig(cfg.problem, cfg.strategy, cfg.trials, seed, cfg.alphas)
    summary = estimate_distribution(sc)
    (out / "simulation.json").write_text(summary.to_json() + "\n")
    (out / "pmf.csv").write_text(summary.to_csv())
    (out / "log_bins.csv").write_text(summary.bins_to_csv())
    return summary.to_dict()


FIGURES = ("fig1-left", "fig1-right", "fig2", "fig3")


def cmd_figures(which: str, out: Path, grid: int | None = None) -> list[Path]:
    targets = FIGURES if which == "all" else (which,)
    written = []
    for fig in targets:
        path = out / f"{fig.replace('-', '_')}.csv"
        fh, w = _writer(path)
        with fh:
            if fig == "fig1-left":
                w.writerow(["p", "excess_users", "exponent_bits"])
                for p, n, e in reports.fig1_left():
                    w.writerow([_fmt(p), n, _fmt(e)])
            elif fig == "fig1-right":
                w.writerow(["excess_users", "exponent_bits", "log2_avg_guesswork", "avg_guesswork"])
                for n, e, lg, g in reports.fig1_right():
                    w.writerow([n, _fmt(e), _fmt(lg), _fmt(g)])
            elif fig == "fig2":
                rows, report = reports.fig2(grid or asy.DEFAULT_GRID)
                w.writerow(["x_bits", "rate_bits_user", "rate_bytes_user", "rate_one_of_two"])
                for row in rows:
                    w.writerow([_fmt(row[0])] + [_fmt(v) for v in row[1:]])
                _write_json(out / "fig2_convexity.json", report.to_dict(2))
            elif fig == "fig3":
                w.writerow(["a", "b", "renyi_half_minus_shannon_bits"])
                for a, b, gap in reports.fig3(grid or 99):
                    w.writerow([_fmt(a), _fmt(b), _fmt(gap)])
            else:
                raise ConfigurationError(f"unknown figure {fig!r}; choose from {', '.join(FIGURES)} or all")
        written.append(path)
    return written


def cmd_verify(seed: int = 0, stream=None) -> bool:
    stream = stream or sys.stdout
    results = reports.run_verification(seed)
    for r in results:
        print(r.line(), file=stream)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"{len(failed)} fixture(s) failed: {'; '.join(failed)}", file=stream)
    else:
        print(f"all {len(results)} fixtures passed", file=stream)
    return not failed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="guesswork", description="Multi-user guesswork analysis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, type=Path, help="JSON problem description")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("analyze", help="asymptotic analysis: Renyi, sCGF, rate functions")
    common(p)
    p.add_argument("--grid", type=int)
    units = p.add_mutually_exclusive_group()
    units.add_argument("--bits", dest="base", action="store_const", const=2.0)
    units.add_argument("--nats", dest="base", action="store_const", const=math.e)
    p.set_defaults(base=2.0)

    p = sub.add_parser("exact", help="exact guesswork distributions")
    common(p)

    p = sub.add_parser("simulate", help="Monte Carlo guesswork distribution")
    common(p)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("figures", help="datasets behind the figures")
    p.add_argument("which", help=f"{', '.join(FIGURES)} or all")
    common(p, config=False)
    p.add_argument("--grid", type=int)

    p = sub.add_parser("verify", help="re-run the built-in checks")
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "verify":
            return EXIT_OK if cmd_verify(args.seed) else EXIT_VERIFY
        if args.command == "figures" and args.which not in FIGURES + ("all",):
            print(f"error: unknown figure {args.which!r}; choose from {', '.join(FIGURES)} or all", file=sys.stderr)
            return EXIT_CONFIG
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "figures":
            for path in cmd_figures(args.which, args.out, args.grid):
                log.info("wrote %s", path)
            return EXIT_OK
        cfg = ProblemConfig.load(args.config)
        if args.command == "analyze":
            summary = cmd_analyze(cfg, args.out, args.base, args.grid)
        elif args.command == "exact":
            summary = cmd_exact(cfg, args.out)
        else:
            summary = cmd_simulate(cfg, args.out, args.seed)
            summary = {k: summary[k] for k in ("seed", "trials", "strategy", "moments")}
        print(json.dumps(summary, indent=2, sort_keys=True))
        return EXIT_OK
    except ResourceCapError as exc:
        print(f"error: {exc}; use 'guesswork simulate' for longer strings", file=sys.stderr)
        return EXIT_CAP
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigurationError, DomainError, UnsupportedModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
