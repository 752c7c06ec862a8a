import json
import subprocess
import sys
import time

import numpy as np
import pytest

from cra.cli import main
from cra.io import read_matrix, write_matrix

CAP = {"ensemble": {"kind": "cap", "n": 20, "p": 40, "q": 2, "height": 0.6}, "s": 3,
       "snr_grid": [60], "trials_per_level": 2, "seed": 3}


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(CAP))
    return str(path)


def _manifest(d, cmd):
    return json.loads((d / f"manifest_{cmd}.json").read_text())


def test_generate_cap(tmp_path, cfg):
    out = tmp_path / "g"
    assert main(["generate", "--config", cfg, "--out", str(out)]) == 0
    X = read_matrix(out / "X.csv")
    assert X.shape == (20, 40)
    assert np.allclose(np.linalg.norm(X, axis=0), 1.0, atol=1e-12)
    m = _manifest(out, "generate")
    assert set(m["outputs"]) == {"X.csv", "beta.csv", "y.csv", "centroids.csv", "labels.csv",
                                 "truth.json"}
    assert len(m["config_digest"]) == 64 and m["seed"] == 3


def test_generate_reproducible(tmp_path, cfg):
    for d in ("a", "b"):
        assert main(["generate", "--config", cfg, "--out", str(tmp_path / d)]) == 0
    for f in ("X.csv", "beta.csv", "y.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (_manifest(tmp_path / "a", "generate")["config_digest"]
            == _manifest(tmp_path / "b", "generate")["config_digest"])


def test_generate_factor_is_fast(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"ensemble": {"kind": "factor", "n": 250, "p": 1000, "q": 25}}))
    t0 = time.perf_counter()
    assert main(["generate", "--config", str(path), "--out", str(tmp_path / "f")]) == 0
    assert time.perf_counter() - t0 < 10


def test_invalid_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"ensemble": {"kind": "cap"}, "trials_per_level": 0}')
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "trials_per_level" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_solve_eta_equal_norm_gives_zero(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((10, 15))
    y = rng.standard_normal(10)
    write_matrix(tmp_path / "X.csv", X)
    write_matrix(tmp_path / "y.csv", y)
    rc = main(["solve", "--X", str(tmp_path / "X.csv"), "--y", str(tmp_path / "y.csv"),
               "--method", "bpdn", "--eta", repr(float(np.linalg.norm(y))), "--out", str(tmp_path)])
    assert rc == 0
    assert not np.any(read_matrix(tmp_path / "estimate.csv"))
    assert _manifest(tmp_path, "solve")["outputs"] == ["estimate.csv"]


@pytest.mark.parametrize("method", ["cra", "omp", "iht", "swap"])
def test_solve_methods(tmp_path, cfg, method):
    g = tmp_path / "g"
    main(["generate", "--config", cfg, "--out", str(g)])
    args = ["solve", "--X", str(g / "X.csv"), "--y", str(g / "y.csv"), "--method", method,
            "--q", "2", "--s", "3", "--eta", "0.001", "--seed", "1", "--out", str(tmp_path / method)]
    assert main(args) == 0
    est = read_matrix(tmp_path / method / "estimate.csv").ravel()
    beta = read_matrix(g / "beta.csv").ravel()
    if method == "iht":  # no recovery guarantee on correlated caps; output is s-sparse
        assert np.count_nonzero(est) <= 3
    else:
        assert set(np.argsort(-np.abs(est))[:3]) == set(np.flatnonzero(beta))


def test_solve_errors(tmp_path):
    write_matrix(tmp_path / "X.csv", np.eye(3))
    write_matrix(tmp_path / "y.csv", np.ones(4))
    base = ["solve", "--X", str(tmp_path / "X.csv"), "--out", str(tmp_path)]
    assert main(base + ["--y", str(tmp_path / "missing.csv")]) == 2
    assert main(base + ["--y", str(tmp_path / "y.csv")]) == 2
    write_matrix(tmp_path / "y3.csv", np.ones(3))
    assert main(base + ["--y", str(tmp_path / "y3.csv"), "--method", "omp"]) == 1


def test_usage_errors():
    assert main([]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["diagnose", "--check", "nonsense"]) == 1
    assert main(["diagnose", "--check", "rip"]) == 1  # needs --X


def test_diagnose_unitary(tmp_path):
    rng = np.random.default_rng(1)
    A = rng.standard_normal((10, 16))
    write_matrix(tmp_path / "A.csv", A / np.linalg.norm(A, axis=0))
    rc = main(["diagnose", "--X", str(tmp_path / "A.csv"), "--check", "unitary,rip,gram,spectrum",
               "--k", "2", "--q", "3", "--trials", "10", "--out", str(tmp_path)])
    assert rc == 0
    import csv
    with open(tmp_path / "unitary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert max(float(r["deviation"]) for r in rows) <= 1e-10
    assert set(_manifest(tmp_path, "diagnose")["outputs"]) == {
        "unitary.csv", "rip.csv", "gram.csv", "spectrum.csv"}


def test_bench_deterministic_and_env_dir(tmp_path, cfg, monkeypatch):
    monkeypatch.setenv("CRA_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["bench", "--config", cfg, "--threads", "1"]) == 0
    assert main(["bench", "--config", cfg, "--threads", "2", "--out", str(tmp_path / "b")]) == 0
    for f in ("records.csv", "summary.csv"):
        assert (tmp_path / "env" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    m = _manifest(tmp_path / "b", "bench")
    assert m["hard_failures"] == 0
    assert set(m["outputs"]) == {"records.csv", "summary.csv", "timings.csv", "timing_report.csv"}


def test_bench_flags_override_file(tmp_path, cfg):
    out = tmp_path / "o"
    assert main(["bench", "--config", cfg, "--snr", "30,50", "--trials", "1",
                 "--estimators", "bpdn", "--out", str(out)]) == 0
    m = _manifest(out, "bench")
    assert m["config"]["snr_grid"] == [30.0, 50.0] and m["config"]["estimators"] == ["bpdn"]


def test_ingest(tmp_path):
    src = tmp_path / "prices.csv"
    rng = np.random.default_rng(2)
    W = np.cumsum(rng.standard_normal((30, 3)), axis=0)
    src.write_text("a,b,c\n" + "\n".join(",".join(repr(float(v)) for v in row) for row in W) + "\n")
    assert main(["ingest", "--input", str(src), "--out", str(tmp_path)]) == 0
    X = read_matrix(tmp_path / "X.csv")
    assert np.allclose(np.linalg.norm(X, axis=0), np.sqrt(30))


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "cra", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "cra" in res.stdout
