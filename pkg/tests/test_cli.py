import json
import math
import subprocess
import sys

import numpy as np
import pytest

from corrlab import corrmat
from corrlab.bounds import am_cost_bounds
from corrlab.cli import main
from corrlab.sweep import SweepConfig, build_family, run_sweep


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_family_bm(tmp_path, capsys):
    code, out, _ = run(["family", "bm", "--m", "6", "--k", "0.5"], capsys)
    assert code == 0
    meta = dict(line[2:].split("=", 1) for line in out.splitlines() if line.startswith("#"))
    assert float(meta["threshold"]) == pytest.approx(1 - math.sqrt(0.5), abs=1e-15)
    rows = [line for line in out.splitlines() if not line.startswith("#")]
    assert rows[0] == "x,y,p" and len(rows) == 37


def test_family_am_and_product(capsys):
    code, out, _ = run(["family", "am", "--m", "4", "--k", "0.5", "--format", "json"], capsys)
    d = json.loads(out)
    assert code == 0 and d["n"] == 5
    assert d["meta"]["q"] == pytest.approx(2 - math.sqrt(3))
    code, out, _ = run(["family", "product", "--u", "uniform:3", "--v", "uniform:3", "--format", "json"], capsys)
    np.testing.assert_allclose(json.loads(out)["entries"], np.full((3, 3), 1 / 9))


def test_family_errors(capsys):
    assert run(["family", "bm", "--m", "2", "--k", "0.5"], capsys)[0] == 3
    assert run(["family", "bm", "--k", "0.5"], capsys)[0] == 2
    assert run(["family", "nope"], capsys)[0] == 2


def test_family_file(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text(corrmat.make_bm(3, 0.2).to_csv())
    code, out, _ = run(["family", "file", "--path", str(path), "--format", "json"], capsys)
    assert code == 0
    np.testing.assert_array_equal(json.loads(out)["entries"], corrmat.make_bm(3, 0.2).entries)


def test_verify_exit_codes(tmp_path, capsys):
    corr, fact = tmp_path / "b6.csv", tmp_path / "b6.json"
    main(["family", "bm", "--m", "6", "--k", "0.5", "--out", str(corr), "--factorization-out", str(fact)])
    capsys.readouterr()
    code, out, _ = run(["verify", "--correlation", str(corr), "--factorization", str(fact), "--lambda", "0.1"], capsys)
    assert code == 0 and json.loads(out)["passed"]
    code, _, _ = run(["verify", "--correlation", str(corr), "--factorization", str(fact), "--lambda", "0.5"], capsys)
    assert code == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["verify", "--correlation", str(corr), "--factorization", str(bad)], capsys)[0] == 2


def test_sweep_bm_step(tmp_path, capsys):
    out = tmp_path / "s.csv"
    certs = tmp_path / "certs"
    code, _, _ = run(["sweep", "--family", "bm", "--m", "6", "--k", "0.5", "--start", "0", "--stop", "0.35",
                      "--count", "30", "--out", str(out), "--cert-dir", str(certs)], capsys)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "lambda,feasible,margin,threshold_bound,cost_lower,cost_upper,advantage_lower,advantage_upper".replace(
        "feasible,", "feasible,status,")
    edge = 1 - math.sqrt(0.5)
    feasible = 0
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        lam = float(cells[0])
        if lam <= edge:
            assert cells[1] == "true" and cells[5] == cells[6] == "2"
            feasible += 1
            code, _, _ = run(["verify", "--certificate", str(certs / f"cert_{i:04d}.json")], capsys)
            assert code == 0
        else:
            assert cells[1] == "false" and cells[5] == "unreachable"
            assert float(cells[7]) == float(cells[8]) == 0
    assert feasible == len(list(certs.iterdir()))


def test_sweep_am_costs_grow(capsys):
    q = corrmat.q_of_k(0.5)
    lams = [q - q / 2**j for j in range(5, 12)]
    rows = run_sweep(SweepConfig(family="am", params={"m": 8, "k": 0.5}, lambdas=lams))
    assert all(r.feasible for r in rows)
    lower = [r.cost_lower for r in rows]
    upper = [r.cost_upper for r in rows]
    assert all(b > a for a, b in zip(lower, lower[1:]))
    assert all(b >= a for a, b in zip(upper, upper[1:]))
    # halving eps scales the lower side by sqrt 2; searched certificates keep
    # the upper side at or below the closed form, which doubles
    assert lower[-1] / lower[-2] == pytest.approx(math.sqrt(2), rel=0.05)
    for lam, up in zip(lams, upper):
        assert up <= am_cost_bounds(8, 0.5, q - lam).upper
    assert upper[-1] > upper[0]


def test_sweep_noiseless_row():
    rows = run_sweep(SweepConfig(family="bm", params={"m": 6, "k": 0.5}, lambdas=[0.0]))
    assert rows[0].feasible and rows[0].cost_lower == 2 and rows[0].advantage_lower > 0


def test_sweep_config_file_and_flags(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"family": "bm", "params": {"m": 4, "k": 0.25}, "lambdas": [0.1, 0.2]}))
    out = tmp_path / "o.csv"
    code, _, _ = run(["sweep", "--config", str(cfg), "--lambdas", "0.3", "--out", str(out)], capsys)
    assert code == 0
    assert len(out.read_text().splitlines()) == 2
    cfg.write_text(json.dumps({"family": "bm", "bogus": 1}))
    assert run(["sweep", "--config", str(cfg)], capsys)[0] == 3


def test_sweep_rejects_unsorted_grid(capsys):
    assert run(["sweep", "--family", "bm", "--m", "4", "--k", "0.3", "--lambdas", "0.2,0.1"], capsys)[0] == 3


def test_sweep_budget_exit(tmp_path, capsys):
    # beyond q but under the permutation bound the search cannot succeed
    code, _, _ = run(["sweep", "--family", "am", "--m", "4", "--k", "0.5", "--lambdas", "0.28",
                      "--restarts", "1", "--max-iters", "5", "--out", str(tmp_path / "x.csv")], capsys)
    assert code == 4


def test_sweep_thread_count_does_not_change_output(monkeypatch, tmp_path):
    cfg = SweepConfig(family="am", params={"m": 4, "k": 0.5}, start=0.0, stop=0.25, count=6)
    texts = []
    for threads in ("1", "3"):
        monkeypatch.setenv("CORRLAB_THREADS", threads)
        rows = run_sweep(cfg)
        texts.append([r.cells() for r in rows])
    assert texts[0] == texts[1]


def test_reproduce_thm3(capsys):
    code, out, _ = run(["reproduce", "thm3"], capsys)
    assert code == 0 and out.count("PASS") == 12


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "corrlab", "family", "bm", "--m", "3", "--k", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "x,y,p" in proc.stdout


def test_build_family_thm1_and_edm_mod():
    P, meta = build_family("thm1", {"schmidt": "0.5,0.5", "alphas": "-1.5,-0.5,0.5,1.5"})
    assert P.n == 5 and "L" in meta
    P, _ = build_family("edm-mod", {"alphas": "0,1,3", "L": "1,2,1", "R": "1,1,1"})
    assert abs(P.entries.sum() - 1) <= 1e-12
