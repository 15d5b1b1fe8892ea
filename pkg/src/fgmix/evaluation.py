"""Performance measures and a product-Gaussian KDE baseline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from .datagen import Dataset
from .predictive import Classifier, DensityModel
from .specfun import LOG_2PI


@dataclass
class MadReport:
    deltas: list[float]
    mad: list[float]
    N: int
    seed: int | None = None

    def to_dict(self):
        return {"deltas": list(self.deltas), "mad": list(self.mad), "N": self.N, "seed": self.seed}


def _points(data):
    return data.points if isinstance(data, Dataset) else np.asarray(data, dtype=float)


def mad_delta(train, predictive_points, deltas, N, rng) -> MadReport:
    """Mean absolute difference of neighbour counts around resampled training points.

    ``N`` reference points are drawn with replacement from ``train``; for each
    radius ``delta`` the counts of predictive and of training points strictly
    within ``delta`` are compared.
    """
    x = _points(train)
    z = np.asarray(predictive_points, dtype=float)
    if z.shape != x.shape:
        raise ValueError("predictive sample must have the training set's shape")
    if N < 1:
        raise ValueError("N must be >= 1")
    seed = int(rng) if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)
    ref = x[rng.integers(x.shape[0], size=N)]
    dz = cdist(ref, z)
    dx = cdist(ref, x)
    mad = [float(np.mean(np.abs((dz < dl).sum(axis=1) - (dx < dl).sum(axis=1)))) for dl in deltas]
    return MadReport([float(dl) for dl in deltas], mad, int(N), seed)


def test_loglik(model, test) -> float:
    """Sum of predictive log-densities over the test points."""
    pts = _points(test)
    if pts.shape[0] == 0:
        return 0.0
    return float(np.sum(model.logpdf(pts)))


test_loglik.__test__ = False  # keep pytest from collecting it when imported into test modules


def classification_accuracy(clf: Classifier, test: Dataset) -> float:
    if test.labels is None:
        raise ValueError("test set has no labels")
    return float(np.mean(clf.predict(test.points) == test.labels))


class GaussianKDE:
    """Product-Gaussian KDE with per-coordinate rule-of-thumb bandwidths
    ``1.06 * sd_j * n^(-1/(d+4))`` (floored at ``1e-6``)."""

    def __init__(self, train, floor: float = 1e-6):
        pts = _points(train)
        if pts.shape[0] < 2:
            raise ValueError("KDE needs at least two points")
        n, d = pts.shape
        self.points = pts
        self.d = d
        self.bandwidth = np.maximum(1.06 * pts.std(axis=0, ddof=1) * n ** (-1.0 / (d + 4)), floor)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        h = self.bandwidth
        out = np.empty(x.shape[0])
        norm = -0.5 * self.d * LOG_2PI - np.sum(np.log(h)) - np.log(self.points.shape[0])
        step = max(1, (1 << 22) // self.points.size)
        for lo in range(0, x.shape[0], step):
            z = (x[lo : lo + step, None, :] - self.points[None]) / h
            out[lo : lo + step] = logsumexp(-0.5 * np.sum(z * z, axis=-1), axis=1) + norm
        return out[0] if single else out

    def sample(self, m, rng):
        rng = np.random.default_rng(rng)
        idx = rng.integers(self.points.shape[0], size=m)
        return self.points[idx] + self.bandwidth * rng.standard_normal((m, self.d))


def kde_baseline_logpdf(x, train):
    return GaussianKDE(train).logpdf(x)


__all__ = [
    "MadReport",
    "mad_delta",
    "test_loglik",
    "classification_accuracy",
    "GaussianKDE",
    "kde_baseline_logpdf",
    "DensityModel",
]
