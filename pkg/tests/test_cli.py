import csv
import json
import math

import pytest

from guesswork import cli
from guesswork.errors import NumericError
from guesswork.exact import GuessworkPmf
from guesswork.montecarlo import dkw_epsilon


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def bern(p):
    return {"type": "iid", "probs": [1 - p, p]}


def read_csv(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if not r[0].startswith("#")]
    return rows[0], rows[1:]


def test_analyze_uniform(tmp_path, capsys):
    cfg = write_config(tmp_path, {"source": bern(0.5), "V": 4, "U": 2})
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(tmp_path / "o"), "--grid", "257"]) == 0
    s = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert s["homogeneous_exponent"] == pytest.approx(1.0, abs=1e-12)
    assert s["growth_exponent"] == pytest.approx(1.0, abs=1e-6)


def test_analyze_bernoulli_key_length(tmp_path):
    cfg = write_config(tmp_path, {"source": bern(0.25), "V": 2, "U": 1, "key_length": 168})
    out = tmp_path / "o"
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(out), "--grid", "513"]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["homogeneous_exponent"] == pytest.approx(0.868908841191443, abs=1e-9)
    assert s["log2_avg_guesswork"] == pytest.approx(168 * 0.868908841191443, abs=1e-6)
    assert s["avg_guesswork"] == pytest.approx(2 ** (168 * 0.868908841191443), rel=1e-6)
    assert s["units"] == "bits" and s["convex"] is True
    for name in ("renyi.csv", "scgf.csv", "rate_user0.csv", "rate_user1.csv", "rate_multi.csv", "convexity.json"):
        assert (out / name).exists()
    header, rows = read_csv(out / "rate_multi.csv")
    assert header == ["x", "value", "identified"]
    assert float(rows[-1][0]) == pytest.approx(1.0)


def test_analyze_nats(tmp_path):
    cfg = write_config(tmp_path, {"source": bern(0.5), "V": 1, "U": 1})
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(tmp_path), "--grid", "65", "--nats"]) == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["units"] == "nats"
    assert s["shannon"][0] == pytest.approx(math.log(2))


def test_analyze_mismatched_nonconvex(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "sources": [
                {"type": "iid", "probs": [0.5, 0.5, 0, 0, 0, 0, 0, 0]},
                {"type": "iid", "probs": [0.55, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05, 0.05]},
            ],
            "U": 1,
        },
    )
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(tmp_path), "--grid", "513"]) == 0
    rep = json.loads((tmp_path / "convexity.json").read_text())
    assert rep["convex"] is False and rep["witness_x"]
    assert {"from": [1], "to": [0]} in [{k: s[k] for k in ("from", "to")} for s in rep["switches"]]
    assert "homogeneous_exponent" not in json.loads((tmp_path / "summary.json").read_text())


def test_exact_two_bits(tmp_path):
    cfg = write_config(tmp_path, {"source": bern(0.5), "V": 2, "U": 2, "k": 1})
    assert cli.main(["exact", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "gopt.csv")
    assert header == ["n", "mass", "cdf"]
    assert [float(r[1]) for r in rows] == [0.25, 0.75]
    assert (tmp_path / "round_robin.csv").exists()


def test_exact_skips_round_robin_past_cap(tmp_path, monkeypatch):
    monkeypatch.setenv("GUESSWORK_CAP", "64")
    cfg = write_config(tmp_path, {"source": bern(0.3), "V": 3, "U": 1, "k": 3})
    assert cli.main(["exact", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert not (tmp_path / "round_robin.csv").exists()
    assert "skipped" in json.loads((tmp_path / "summary.json").read_text())["round_robin"]


def test_exact_cap_exit(tmp_path, capsys):
    cfg = write_config(tmp_path, {"source": bern(0.5), "V": 2, "U": 1, "k": 40})
    assert cli.main(["exact", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_CAP == 4
    assert "simulate" in capsys.readouterr().err


def test_simulate_within_dkw(tmp_path):
    cfg = write_config(
        tmp_path, {"source": bern(0.5), "V": 2, "U": 2, "k": 1, "strategy": "g_opt", "trials": 100_000}
    )
    for run in ("a", "b"):
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / run), "--seed", "9"]) == 0
    for name in ("pmf.csv", "log_bins.csv", "simulation.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "pmf.csv").read_text()
    assert text.startswith("# seed=9 trials=100000")
    _, rows = read_csv(tmp_path / "a" / "pmf.csv")
    emp = {int(r[0]): float(r[3]) for r in rows}
    exact = GuessworkPmf([0.25, 0.75])
    assert max(abs(emp.get(n, 0.0) - exact.cdf_at(n)) for n in (1, 2)) <= dkw_epsilon(100_000)


def test_simulate_requires_seed(tmp_path):
    cfg = write_config(tmp_path, {"source": bern(0.5), "V": 2, "U": 2})
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_figures(tmp_path):
    assert cli.main(["figures", "all", "--out", str(tmp_path), "--grid", "257"]) == 0
    header, rows = read_csv(tmp_path / "fig1_left.csv")
    assert header == ["p", "excess_users", "exponent_bits"]
    assert all(float(r[2]) == pytest.approx(1.0) for r in rows if float(r[0]) == 0.5)
    header, rows = read_csv(tmp_path / "fig1_right.csv")
    assert len(rows) == 9 and float(rows[0][2]) == pytest.approx(168 * 0.899968626952992, abs=1e-9)
    header, rows = read_csv(tmp_path / "fig2.csv")
    x = [float(r[0]) for r in rows]
    i = min(range(len(x)), key=lambda j: abs(x[j] - 0.5))
    a, b, m = (float(v) for v in rows[i][1:])
    assert m == pytest.approx(min(a, b), abs=1e-9)
    assert all(r[3] == "inf" for r in rows if float(r[0]) > 1 + 1e-9)
    header, rows = read_csv(tmp_path / "fig3.csv")
    centre = [r for r in rows if float(r[0]) == 0.5 and float(r[1]) == 0.5]
    assert len(centre) == 1 and abs(float(centre[0][2])) < 1e-12


def test_figures_deterministic(tmp_path):
    for run in ("a", "b"):
        assert cli.main(["figures", "fig3", "--out", str(tmp_path / run), "--grid", "19"]) == 0
    assert (tmp_path / "a" / "fig3.csv").read_bytes() == (tmp_path / "b" / "fig3.csv").read_bytes()


def test_unknown_figure(tmp_path):
    assert cli.main(["figures", "fig7", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize(
    "cfg",
    [
        {"U": 1},
        {"source": bern(0.5), "U": 1},
        {"source": bern(0.5), "V": 2, "U": 3},
        {"source": {"type": "lfsr"}, "V": 2, "U": 1},
        {"source": {"type": "iid", "probs": [0.5, 0.6]}, "V": 2, "U": 1},
        {"sources": [bern(0.5)], "source": bern(0.5), "V": 1, "U": 1},
    ],
)
def test_bad_configs(tmp_path, capsys, cfg):
    p = write_config(tmp_path, cfg)
    assert cli.main(["exact", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err


def test_unreadable_config(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    assert cli.main(["analyze", "--config", str(tmp_path / "x.json"), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NumericError("did not converge")

    monkeypatch.setattr(cli.asy, "rate_single", boom)
    cfg = write_config(tmp_path, {"source": bern(0.5), "V": 1, "U": 1})
    assert cli.main(["analyze", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_verify(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 11 and "FAIL" not in out
    assert "(0.6, 0.85)" in out and "(0.5, 0.9)" in out


def test_verify_failure_exit(monkeypatch, capsys):
    from guesswork import reports

    monkeypatch.setattr(reports, "run_verification", lambda seed=0: [reports.Check("demo", False, "broken")])
    assert cli.main(["verify"]) == 1
    assert "1 fixture(s) failed: demo" in capsys.readouterr().out
