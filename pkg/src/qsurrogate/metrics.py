"""Evaluation metrics for predicted vs reference values."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import gaussian_kde


@dataclass
class MetricsReport:
    m: int
    mae: float
    mse: float
    wd: float
    r2: float | None
    pearson: float | None
    kde_grid: np.ndarray
    kde_ref: np.ndarray | None
    kde_pred: np.ndarray | None
    bandwidth: float
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "MAE": self.mae,
            "MSE": self.mse,
            "WD": self.wd,
            "R2": self.r2,
            "Pearson": self.pearson,
            "kde_bandwidth": self.bandwidth,
            "notes": self.notes,
        }

    def kde_rows(self) -> list[tuple[float, float | None, float | None]]:
        ref = self.kde_ref if self.kde_ref is not None else [None] * len(self.kde_grid)
        pred = self.kde_pred if self.kde_pred is not None else [None] * len(self.kde_grid)
        return [(float(g), None if r is None else float(r), None if p is None else float(p))
                for g, r, p in zip(self.kde_grid, ref, pred)]


def wasserstein_1d(a, b) -> float:
    """W1 between equal-size empirical distributions: mean |sorted difference|."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise ValueError("sorting-based W1 needs equal sample counts")
    return float(np.mean(np.abs(a - b)))


def _kde(values: np.ndarray, grid: np.ndarray):
    if values.size < 2 or np.ptp(values) == 0:
        return None
    return gaussian_kde(values, bw_method="scott")(grid)


def compute_metrics(y_ref, y_pred, grid_points: int = 200) -> MetricsReport:
    y = np.asarray(y_ref, dtype=float).reshape(-1)
    p = np.asarray(y_pred, dtype=float).reshape(-1)
    if y.shape != p.shape:
        raise ValueError("reference and prediction lengths differ")
    if y.size == 0:
        raise ValueError("empty inputs")
    err = p - y
    notes = {}
    var_y = float(np.var(y))
    if var_y == 0:
        r2 = pearson = None
        notes["R2"] = notes["Pearson"] = "undefined: reference has zero variance"
    else:
        r2 = float(1 - np.mean(err**2) / var_y)
        if np.var(p) == 0:
            pearson = None
            notes["Pearson"] = "undefined: prediction has zero variance"
        else:
            pearson = float(np.clip(np.corrcoef(y, p)[0, 1], -1, 1))
    m = y.size
    lo = min(y.min(), p.min())
    hi = max(y.max(), p.max())
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    grid = np.linspace(lo - pad, hi + pad, grid_points)
    return MetricsReport(
        m=m,
        mae=float(np.mean(np.abs(err))),
        mse=float(np.mean(err**2)),
        wd=wasserstein_1d(y, p),
        r2=r2,
        pearson=pearson,
        kde_grid=grid,
        kde_ref=_kde(y, grid),
        kde_pred=_kde(p, grid),
        bandwidth=float(m ** (-1 / 5)),
        notes=notes,
    )
