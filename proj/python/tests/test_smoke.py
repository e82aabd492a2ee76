import math
from itertools import product
from pathlib import Path

import numpy as np
import pytest

import adapt_drift as ad


def test_rotating_stream_shapes():
    (x0, y0), stream = ad.generate_rotating(n_per_class=50, periods=4, seed=1)
    assert x0.shape == (100, 2) and y0.shape == (100,)
    assert [pid for pid, _ in stream] == [1, 2, 3]
    assert sorted(np.bincount(y0)) == [50, 50]


def test_offline_predictions_never_change_model():
    (x0, y0), stream = ad.generate_rotating(n_per_class=50, periods=4)
    periods = [data for _, data in stream]
    recs = ad.run_adapt(x0, y0, periods, mode="offline")
    assert len({r["model_checksum"] for r in recs}) == 1
    assert not any(r["retrained"] for r in recs)


def test_oracle_consumes_period_truth():
    (x0, y0), stream = ad.generate_rotating(n_per_class=50, periods=4)
    periods = [data for _, data in stream]
    recs = ad.run_adapt(x0, y0, periods, mode="oracle")
    for rec, (x, _) in zip(recs, periods):
        assert rec["ground_truth_used"] == len(x)
        assert rec["augmented_rows"] == 0 and rec["mixup_rows"] == 0


def test_adapt_is_deterministic():
    (x0, y0), stream = ad.generate_rotating(n_per_class=50, periods=4)
    periods = [data for _, data in stream]
    a = ad.run_adapt(x0, y0, periods, seed=3)
    b = ad.run_adapt(x0, y0, periods, seed=3)
    for ra, rb in zip(a, b):
        np.testing.assert_array_equal(ra["probs"], rb["probs"])
        assert ra["model_checksum"] == rb["model_checksum"]


def test_selection_matches_row_rule():
    rng = np.random.default_rng(0)
    p = rng.dirichlet([1, 1, 1], size=200)
    idx, labels = ad.select_pseudo_labels(p, 0.7, 0.6, benign_class=0)
    want = [i for i, row in enumerate(p) if row.max() > (0.7 if row.argmax() == 0 else 0.6)]
    assert list(idx) == want
    assert list(labels) == [int(p[i].argmax()) for i in want]


@pytest.mark.parametrize("tau,mu,lam", list(product([0.0, 0.5, 1.0], repeat=3)))
def test_threshold_update(tau, mu, lam):
    b, m = ad.update_thresholds(tau, tau, lam, mu, mu)
    assert b == m == lam * mu + (1 - lam) * tau


def test_otdd_one_dimensional_closed_form():
    rng = np.random.default_rng(1)
    a = rng.normal(0.0, 1.0, size=(4000, 1))
    b = rng.normal(2.0, 3.0, size=(4000, 1))
    want = (a.mean() - b.mean()) ** 2 + (a.std(ddof=1) - b.std(ddof=1)) ** 2
    assert math.isclose(ad.otdd(a, b), want, rel_tol=1e-9)
    assert ad.otdd(a, a) <= 1e-8


def test_evaluation_helpers():
    assert ad.absolute_exposure([3, 0, 2]) == [3, 3, 5]
    _, p = ad.wilcoxon([1, 2, 3, 4, 5, 6], [0] * 6)
    assert p == pytest.approx(0.03125, abs=1e-12)
    assert ad.rank_auc([0.9, 0.8], [0.1, 0.8]) == pytest.approx(0.875)
    m = ad.period_metrics(np.array([1, 1, 0, 0]), np.array([1, 0, 0, 1]))
    assert (m["tp"], m["fp"], m["tn"], m["fn"]) == (1, 1, 1, 1)


def test_calibration_perfect_confidence():
    probs = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert ad.expected_calibration_error(probs, np.array([0, 1])) == 0.0


def test_invalid_config_raises_value_error():
    (x0, y0), stream = ad.generate_rotating(n_per_class=20, periods=3)
    with pytest.raises(ValueError):
        ad.run_adapt(x0, y0, [d for _, d in stream], lam=1.5)


def test_cli_entry_points(tmp_path: Path):
    rc, msg = ad.cmd_synth(str(tmp_path / "data" / "manifest.json"), n_per_class=30, periods=4)
    assert rc == 0, msg
    (tmp_path / "config.json").write_text(
        '{"data": {"manifest": "data/manifest.json"}, "output": {"dir": "out"}, "evaluation": {"seeds": [0]}}'
    )
    rc, msg = ad.cmd_run(str(tmp_path / "config.json"))
    assert rc == 0, msg
    metrics = (tmp_path / "out" / "metrics.csv").read_text()
    rc, msg = ad.cmd_report(str(tmp_path / "out" / "run_manifest.jsonl"), str(tmp_path / "rebuilt"))
    assert rc == 0, msg
    assert (tmp_path / "rebuilt" / "metrics.csv").read_text() == metrics
    rc, msg = ad.cmd_drift(str(tmp_path / "data" / "manifest.json"), str(tmp_path / "drift.csv"))
    assert rc == 0, msg
    rc, msg = ad.cmd_run(str(tmp_path / "missing.json"))
    assert rc == 1 and msg
