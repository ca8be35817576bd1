"""Evaluation statistics: MAE, mean standardized MAE and logMAE."""

import csv
from dataclasses import dataclass
import math

import numpy as np

from .exceptions import ContractError, UndefinedMetricError

FLOAT_FMT = ".17g"


@dataclass(frozen=True)
class TargetStats:
    """Per-target standard deviation of the ground truth of a reference split."""

    sigma: np.ndarray
    n: int
    split: str = "train"

    def __post_init__(self):
        if np.any(~(np.asarray(self.sigma) > 0)):
            raise ContractError("every target standard deviation must be positive")

    @property
    def m(self):
        return len(self.sigma)

    @classmethod
    def from_targets(cls, targets, split="train"):
        t = np.asarray(targets, dtype=np.float64)
        if t.ndim == 1:
            t = t[:, None]
        return cls(t.std(axis=0), len(t), split)


def mae(preds, targets, axis=None):
    """Mean absolute error (per column with ``axis=0``)."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ContractError(f"shape mismatch {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ContractError("mae of an empty array")
    out = np.mean(np.abs(p - t), axis=axis)
    return float(out) if np.ndim(out) == 0 else out


def _ratios(per_target_mae, sigma):
    m = np.atleast_1d(np.asarray(per_target_mae, dtype=np.float64))
    s = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    if m.shape != s.shape or m.size == 0:
        raise ContractError(f"need matching non-empty MAE and sigma, got {m.shape} and {s.shape}")
    if np.any(s <= 0):
        raise ContractError("sigma must be positive for every target")
    return m / s


def std_mae(per_target_mae, sigma):
    """(1/M) sum_m MAE_m / sigma_m."""
    return float(np.mean(_ratios(per_target_mae, sigma)))


def log_mae(per_target_mae, sigma):
    """(1/M) sum_m log(MAE_m / sigma_m), natural log."""
    r = _ratios(per_target_mae, sigma)
    if np.any(r == 0):
        raise UndefinedMetricError("logMAE is undefined when a target has zero MAE")
    return float(np.mean(np.log(r)))


def metrics_rows(preds, targets, stats, names, units=None):
    """One row per target: name, unit, MAE, MAE/sigma, log(MAE/sigma)."""
    p = np.asarray(preds, dtype=np.float64).reshape(len(preds), -1)
    t = np.asarray(targets, dtype=np.float64).reshape(len(targets), -1)
    per = np.atleast_1d(mae(p, t, axis=0))
    ratios = _ratios(per, stats.sigma)
    units = units or {}
    rows = []
    for name, m, r in zip(names, per, ratios):
        rows.append((name, units.get(name, ""), float(m), float(r),
                     math.log(r) if r > 0 else float("nan")))
    return rows


def write_metrics_csv(path, rows, stats=None):
    """Write :func:`metrics_rows`; the sigma split is noted in a trailing comment."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["target", "unit", "mae", "mae_over_sigma", "log_mae_over_sigma"])
        for name, unit, m, r, lg in rows:
            w.writerow([name, unit, format(m, FLOAT_FMT), format(r, FLOAT_FMT), format(lg, FLOAT_FMT)])
        if stats is not None:
            fh.write(f"# sigma from {stats.split} split (n={stats.n})\n")
