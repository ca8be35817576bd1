import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dimenet.exceptions import ContractError, UndefinedMetricError
from dimenet.metrics import TargetStats, log_mae, mae, metrics_rows, std_mae, write_metrics_csv


def test_mae():
    assert mae([1, 2], [1, 2]) == 0.0
    assert mae([0, 0], [1, -1]) == 1.0
    assert mae([1, 2, 3], [1, 1, 1]) == 1.0
    with pytest.raises(ContractError):
        mae([], [])
    with pytest.raises(ContractError):
        mae([1], [1, 2])


def test_std_mae():
    assert std_mae([0, 0], [1, 2]) == 0.0
    assert std_mae([0.5], [0.5]) == 1.0
    assert std_mae([0.01, 0.06], [1.0, 2.0]) == pytest.approx(0.02, rel=1e-14)
    with pytest.raises(ContractError):
        std_mae([1.0], [0.0])


def test_log_mae():
    assert log_mae([2.0], [2.0]) == 0.0
    assert log_mae([1 / math.e], [1.0]) == pytest.approx(-1.0, rel=1e-15)
    assert log_mae([math.exp(-4), math.exp(-6)], [1.0, 1.0]) == -5.0
    with pytest.raises(UndefinedMetricError):
        log_mae([0.0, 1.0], [1.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(1e-6, 1e3), min_size=1, max_size=5), st.floats(1e-3, 1e3), st.data())
def test_metric_invariances(m, scale, data):
    sigma = data.draw(st.lists(st.floats(1e-3, 1e3), min_size=len(m), max_size=len(m)))
    k = data.draw(st.integers(0, len(m) - 1))
    m2, s2 = list(m), list(sigma)
    m2[k] *= scale
    s2[k] *= scale
    assert std_mae(m2, s2) == pytest.approx(std_mae(m, sigma), rel=1e-12)
    improved = [v / 10 for v in m]
    assert log_mae(improved, sigma) == pytest.approx(log_mae(m, sigma) - math.log(10), abs=1e-12)


def test_report(tmp_path):
    targets = np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]])
    preds = targets + np.array([[0.1, -0.2], [0.1, 0.2], [-0.1, 0.2]])
    stats = TargetStats.from_targets(targets)
    rows = metrics_rows(preds, targets, stats, ["a", "b"], {"a": "eV"})
    assert rows[0][:2] == ("a", "eV")
    assert rows[0][2] == pytest.approx(0.1, rel=1e-12)
    assert rows[1][3] == pytest.approx(0.2 / np.std([1.0, 3.0, 8.0]), rel=1e-12)
    path = tmp_path / "m.csv"
    write_metrics_csv(path, rows, stats)
    lines = path.read_text().splitlines()
    assert lines[0] == "target,unit,mae,mae_over_sigma,log_mae_over_sigma"
    assert float(lines[1].split(",")[2]) == rows[0][2]
    assert lines[-1].startswith("# sigma from train split")


def test_stats_reject_constant_target():
    with pytest.raises(ContractError):
        TargetStats.from_targets([1.0, 1.0, 1.0])
