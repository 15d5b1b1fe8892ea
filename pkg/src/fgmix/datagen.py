"""Seeded synthetic datasets concentrated near curves and surfaces."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import fresnel

RING_CENTERS = np.array([[0.0, 0.0], [2.125, 0.0], [4.25, 0.0], [1.125, -1.0], [3.25, -1.0]])


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("points must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.points.shape[0],):
                raise ValueError("labels must have one entry per point")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def subset(self, idx) -> "Dataset":
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.points[idx], labels, dict(self.meta))

    def by_class(self) -> dict[int, np.ndarray]:
        if self.labels is None:
            raise ValueError("dataset has no labels")
        return {int(c): self.points[self.labels == c] for c in np.unique(self.labels)}


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _seed_meta(seed):
    return int(seed) if isinstance(seed, (int, np.integer)) else None


def add_gaussian_noise(points, sd, rng):
    """Add N(0, sd^2 I) noise (no-op when ``sd == 0``)."""
    points = np.asarray(points, dtype=float)
    if sd == 0:
        return points.copy()
    return points + sd * rng.standard_normal(points.shape)


def euler_curve(t):
    """Unit-speed Euler spiral through the origin; signed curvature ``pi * t``."""
    s, c = fresnel(np.asarray(t, dtype=float))
    return np.stack([c, s], axis=-1)


def euler_spiral(n=500, noise_sd=0.001, seed=None, t_max=1.5):
    """``n`` points at arc lengths uniform on ``[-t_max, t_max]``, plus noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = _rng(seed)
    t = rng.uniform(-t_max, t_max, size=n)
    pts = add_gaussian_noise(euler_curve(t), noise_sd, rng)
    meta = {"generator": "euler_spiral", "n": n, "noise_sd": noise_sd, "t_max": t_max, "seed": _seed_meta(seed)}
    return Dataset(pts, None, meta)


def olympic_rings(seed=None, noise_sd=0.01, per_ring=100):
    """Five unit circles; ring ``i`` (1-based) gets ``i * per_ring`` points."""
    rng = _rng(seed)
    pts, labels = [], []
    for i, center in enumerate(RING_CENTERS):
        m = (i + 1) * per_ring
        theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
        pts.append(center + np.stack([np.cos(theta), np.sin(theta)], axis=1))
        labels.append(np.full(m, i))
    pts = add_gaussian_noise(np.concatenate(pts), noise_sd, rng)
    meta = {"generator": "olympic_rings", "noise_sd": noise_sd, "per_ring": per_ring, "seed": _seed_meta(seed)}
    return Dataset(pts, np.concatenate(labels), meta)


def torus(n=1500, R=3.0, r=1.0, noise_var=0.1, seed=None):
    """Torus of revolution about the z axis, angles uniform, plus noise."""
    if not R > r > 0:
        raise ValueError("need R > r > 0")
    rng = _rng(seed)
    u = rng.uniform(0.0, 2.0 * np.pi, size=n)
    v = rng.uniform(0.0, 2.0 * np.pi, size=n)
    ring = R + r * np.cos(v)
    pts = np.stack([ring * np.cos(u), ring * np.sin(u), r * np.sin(v)], axis=1)
    pts = add_gaussian_noise(pts, np.sqrt(noise_var), rng)
    meta = {"generator": "torus", "n": n, "R": R, "r": r, "noise_var": noise_var, "seed": _seed_meta(seed)}
    return Dataset(pts, None, meta)


def spiral_arm(theta, theta_max):
    rho = theta / theta_max
    return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)


def two_spirals(n_per_class=100, noise_sd=0.02, seed=None, turns=1.5):
    """Two interleaved Archimedean spirals meeting at the origin.

    Class 0 follows ``rho = theta / theta_max`` for ``theta`` in
    ``[0, 2 pi turns]``; class 1 is class 0 rotated by pi. Points are
    roughly uniform in arc length, and both classes share the same angles.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    rng = _rng(seed)
    theta_max = 2.0 * np.pi * turns
    theta = theta_max * np.sqrt(rng.random(n_per_class))
    arm = spiral_arm(theta, theta_max)
    pts = add_gaussian_noise(np.concatenate([arm, -arm]), noise_sd, rng)
    labels = [np.zeros(n_per_class, dtype=np.int64), np.ones(n_per_class, dtype=np.int64)]
    meta = {"generator": "two_spirals", "n_per_class": n_per_class, "noise_sd": noise_sd, "turns": turns,
            "seed": _seed_meta(seed)}
    return Dataset(pts, np.concatenate(labels), meta)


GENERATORS = {
    "euler_spiral": euler_spiral,
    "olympic_rings": olympic_rings,
    "torus": torus,
    "two_spirals": two_spirals,
}
