import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

import cra.experiments as ex
from cra.experiments import (ExperimentConfig, TrialRecord, reduced_observation_study,
                             relative_error, run_experiment, timing_report, tpr)

CAP = {"kind": "cap", "n": 30, "p": 60, "q": 2, "height": 0.6}


def _cfg(**kw):
    base = dict(ensemble=CAP, s=3, snr_grid=[40, 60], trials_per_level=2, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_relative_error_examples():
    b = np.array([1.0, 0, 2])
    assert relative_error(b, b, 2) == 0
    assert relative_error(b, np.zeros(3), 2) == 1
    assert relative_error([2.0, 0.0], [1.0, 5.0], 1) == pytest.approx(np.sqrt(29) / 2)
    with pytest.raises(ValueError):
        relative_error(np.zeros(3), b, 1)


def test_tpr_examples():
    b = np.array([1.0, 2, 0, 0])
    assert tpr(b, b, 2) == 1
    assert tpr(b, [0, 0, 1.0, 1.0], 2) == 0
    beta = np.zeros(8)
    beta[[1, 2, 3, 4]] = 1
    est = np.zeros(8)
    est[[1, 2, 5, 6]] = 1
    assert tpr(beta, est, 4) == 0.5


@given(st.integers(0, 1000))
def test_metrics_depend_only_on_best_s_term(seed):
    rng = np.random.default_rng(seed)
    beta = np.zeros(20)
    beta[rng.choice(20, 4, replace=False)] = rng.uniform(1, 2, 4)
    bh = rng.standard_normal(20)
    top = np.argsort(-np.abs(bh), kind="stable")[:4]
    # shrink everything outside the top 4 without changing the order
    bh2 = bh.copy()
    mask = np.ones(20, bool)
    mask[top] = False
    bh2[mask] *= 0.5
    assert relative_error(beta, bh, 4) == relative_error(beta, bh2, 4)
    assert tpr(beta, bh, 4) == tpr(beta, bh2, 4)
    assert 0 <= tpr(beta, bh, 4) <= 1 and relative_error(beta, bh, 4) >= 0


def test_config_validation_and_round_trip():
    cfg = _cfg()
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        _cfg(snr_grid=[])
    with pytest.raises(ValueError):
        _cfg(trials_per_level=0)
    with pytest.raises(ValueError):
        _cfg(estimators=["lasso"])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"ensemble": CAP, "bogus": 1})
    with pytest.raises(ValueError):
        _cfg(ensemble={"kind": "mystery"})


def test_defaults():
    cfg = ExperimentConfig(ensemble=CAP)
    assert cfg.snr_grid == tuple(float(v) for v in range(10, 101, 5)) and len(cfg.snr_grid) == 19
    assert cfg.trials_per_level == 30 and cfg.s == 20


def test_single_record_bit_exact():
    cfg = _cfg(snr_grid=[60], trials_per_level=1, estimators=["bpdn"])
    a, b = run_experiment(cfg), run_experiment(cfg)
    assert len(a.records) == 1
    assert a.records[0].relative_error == b.records[0].relative_error
    assert a.records[0].input_digest == b.records[0].input_digest


def test_paired_inputs_and_summary_means():
    res = run_experiment(_cfg())
    assert len(res.records) == 2 * 2 * 5
    for snr in (40.0, 60.0):
        for t in range(2):
            digests = {r.input_digest for r in res.records if r.snr_db == snr and r.trial == t}
            assert len(digests) == 1
    for row in res.summary:
        group = [r for r in res.records
                 if r.estimator == row["estimator"] and r.snr_db == row["snr_db"]]
        assert row["mean_relative_error"] == pytest.approx(
            sum(r.relative_error for r in group) / len(group), rel=1e-12)
        assert row["mean_tpr"] == pytest.approx(sum(r.tpr for r in group) / len(group), rel=1e-12)


def test_thread_count_does_not_change_results(tmp_path):
    a = run_experiment(_cfg(), threads=1).write(tmp_path, "a_")
    b = run_experiment(_cfg(), threads=3).write(tmp_path, "b_")
    for key in ("records", "summary"):
        with open(a[key], "rb") as fa, open(b[key], "rb") as fb:
            assert fa.read() == fb.read()


def test_csv_schema(tmp_path):
    paths = run_experiment(_cfg(trials_per_level=1)).write(tmp_path)
    with open(paths["records"]) as fh:
        assert next(csv.reader(fh)) == ex.RECORD_COLUMNS
    with open(paths["summary"]) as fh:
        assert next(csv.reader(fh)) == ex.SUMMARY_COLUMNS
    with open(paths["timings"]) as fh:
        assert next(csv.reader(fh)) == ex.TIMING_COLUMNS


def test_estimator_failure_is_recorded(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")
    monkeypatch.setattr(ex, "swap_refine", boom)
    res = run_experiment(_cfg(trials_per_level=1))
    swaps = [r for r in res.records if r.estimator == "swap"]
    assert swaps and all(r.failed and "exploded" in r.status for r in swaps)
    assert all(not r.failed for r in res.records if r.estimator != "swap")
    assert res.hard_failures == len(swaps)


def test_reduced_study_same_n_is_zero():
    cfg = _cfg(estimators=["cra", "bpdn"], trials_per_level=1)
    rows = reduced_observation_study(cfg, [30, 30])
    assert rows and all(r["tpr_drop"] == 0 for r in rows)
    with pytest.raises(ValueError):
        reduced_observation_study(cfg, [20, 30])


def test_timing_report():
    rec = TrialRecord(60.0, 0, "bpdn", 0.1, 1.0, 2.0)
    assert timing_report([rec]) == [{"estimator": "bpdn", "trials": 1, "mean_wall_time": 2.0}]
    assert timing_report([]) == []
    rows = timing_report([rec], clustering_time=0.5)
    assert rows[-1]["estimator"] == "clustering"


def test_cra_solve_faster_than_raw_bpdn():
    cfg = ExperimentConfig(ensemble={"kind": "factor", "n": 120, "p": 400, "q": 10}, s=8,
                           snr_grid=[60], trials_per_level=3, estimators=["cra", "bpdn"],
                           clustering_method="top_subspace")
    rows = {r["estimator"]: r["mean_wall_time"] for r in timing_report(run_experiment(cfg).records)}
    assert rows["cra"] < rows["bpdn"]


def test_cra_error_monotone_in_snr():
    cfg = ExperimentConfig(ensemble={"kind": "cap", "n": 60, "p": 150, "q": 3, "height": 0.7},
                           s=5, trials_per_level=3, estimators=["cra"], seed=3)
    means = [r["mean_relative_error"] for r in run_experiment(cfg).summary]
    assert len(means) == 19
    assert sum(b > a for a, b in zip(means, means[1:])) <= 1
