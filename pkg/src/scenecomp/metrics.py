"""Statistical distances between heatmap sets and four-moment summaries.

2D grids are compared as 1D distributions over their row-major flattening,
with support points spread evenly over [0, 1] so values are comparable
across grid resolutions. The convention is recorded in every report.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotNormalizedError, ShapeMismatchError
from .raster import HeatmapSet

FLATTENING_CONVENTION = "row-major-1d-unit-support"
NORMALIZATION_ATOL = 1e-6


def _as_flat_dist(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).ravel()
    if abs(p.sum() - 1.0) > NORMALIZATION_ATOL or np.any(p < 0):
        raise NotNormalizedError("distribution must be non-negative and sum to 1")
    return p


def wasserstein_grid(p: np.ndarray, q: np.ndarray) -> float:
    """1-Wasserstein distance over the flattened unit-interval support."""
    p, q = _as_flat_dist(p), _as_flat_dist(q)
    if p.size != q.size:
        raise ShapeMismatchError("distributions must share a support")
    du = 1.0 / (p.size - 1)
    return float(np.abs(np.cumsum(p - q)).sum() * du)


def energy_grid(p: np.ndarray, q: np.ndarray) -> float:
    """Energy distance sqrt(2 E|X-Y| - E|X-X'| - E|Y-Y'|) on the same support.

    Expectations reduce through the CDF identity
    E|X-Y| = sum_k (F_p + F_q - 2 F_p F_q)(u_k) * du to the exact form
    2 sum_k (F_p - F_q)^2(u_k) * du, which matches the weighted double sum
    over support points and is identically zero when p == q.
    """
    p, q = _as_flat_dist(p), _as_flat_dist(q)
    if p.size != q.size:
        raise ShapeMismatchError("distributions must share a support")
    du = 1.0 / (p.size - 1)
    fp = np.cumsum(p)[:-1]
    fq = np.cumsum(q)[:-1]
    return math.sqrt(2.0 * float(((fp - fq) ** 2).sum()) * du)


def frobenius_diff(a: np.ndarray, b: np.ndarray) -> float:
    """Frobenius norm of the elementwise difference."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape {a.shape} != {b.shape}")
    return float(np.sqrt(((a - b) ** 2).sum()))


@dataclass(frozen=True)
class Moments:
    n: int
    mean: float | None = None
    variance: float | None = None
    skewness: float | None = None
    kurtosis: float | None = None  # excess kurtosis

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "variance": self.variance,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
        }


def four_moments(samples) -> Moments:
    """Sample mean, unbiased variance, bias-corrected skewness, excess kurtosis.

    Fields that need more samples (or nonzero variance) than available are
    reported absent rather than raising.
    """
    x = np.asarray(list(samples), dtype=np.float64)
    n = x.size
    if n == 0:
        return Moments(0)
    mean = float(x.mean())
    if n < 2:
        return Moments(n, mean)
    variance = float(x.var(ddof=1))
    m2 = float(x.var(ddof=0))
    skewness = kurtosis = None
    if m2 > 0:
        centered = x - mean
        if n >= 3:
            g1 = float((centered ** 3).mean()) / m2 ** 1.5
            skewness = g1 * math.sqrt(n * (n - 1)) / (n - 2)
        if n >= 4:
            g2 = float((centered ** 4).mean()) / m2 ** 2 - 3.0
            kurtosis = ((n + 1) * g2 + 6) * (n - 1) / ((n - 2) * (n - 3))
    return Moments(n, mean, variance, skewness, kurtosis)


@dataclass(frozen=True)
class MetricsReport:
    """Moment summaries for each distance over its evaluation population.

    Distances are one value per (room, class-present-in-truth) pair; the
    Frobenius norm is one value per room over its full class stack.
    """

    wasserstein: Moments
    energy: Moments
    frobenius: Moments
    provenance: dict | None = None

    def to_dict(self) -> dict:
        return {
            "flattening_convention": FLATTENING_CONVENTION,
            "wasserstein": self.wasserstein.to_dict(),
            "energy": self.energy.to_dict(),
            "frobenius": self.frobenius.to_dict(),
            "provenance": self.provenance or {},
        }


def _collect(pred: HeatmapSet, truth: HeatmapSet):
    if pred.data.shape != truth.data.shape:
        raise ShapeMismatchError(
            f"prediction shape {pred.data.shape} != truth shape {truth.data.shape}"
        )
    if pred.room_ids != truth.room_ids:
        raise ShapeMismatchError("prediction and truth room ids differ")
    w_vals, e_vals, f_vals = [], [], []
    present = truth.data.sum(axis=(2, 3)) > 0
    for ri in range(truth.data.shape[0]):
        for ci in np.nonzero(present[ri])[0]:
            w_vals.append(wasserstein_grid(pred.data[ri, ci], truth.data[ri, ci]))
            e_vals.append(energy_grid(pred.data[ri, ci], truth.data[ri, ci]))
        f_vals.append(frobenius_diff(pred.data[ri], truth.data[ri]))
    return w_vals, e_vals, f_vals


def evaluate(pred: HeatmapSet, truth: HeatmapSet, provenance: dict | None = None) -> MetricsReport:
    """Distances per (room, present class), Frobenius per room, four moments each."""
    w_vals, e_vals, f_vals = _collect(pred, truth)
    return MetricsReport(
        four_moments(w_vals), four_moments(e_vals), four_moments(f_vals), provenance
    )


def evaluate_many(pairs, provenance: dict | None = None) -> MetricsReport:
    """Pool the populations of several (pred, truth) heatmap-set pairs."""
    w_all, e_all, f_all = [], [], []
    for pred, truth in pairs:
        w, e, f = _collect(pred, truth)
        w_all += w
        e_all += e
        f_all += f
    return MetricsReport(
        four_moments(w_all), four_moments(e_all), four_moments(f_all), provenance
    )
