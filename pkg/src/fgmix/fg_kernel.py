"""Fisher-Gaussian kernel: a vMF point on a sphere of radius r about c, plus
isotropic Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .directional import VmfParams, sample_vmf
from .specfun import LOG_2PI, log_cd, log_cd_scaled


@dataclass(frozen=True)
class FgParams:
    c: np.ndarray
    r: float
    vmf: VmfParams
    sigma2: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        if c.shape != self.vmf.mu.shape:
            raise ValueError("center and mean direction must share the dimension")
        if not self.r > 0:
            raise ValueError("radius must be > 0")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be > 0")

    @property
    def d(self) -> int:
        return self.c.size


def log_fg(x, c, r, mu, tau, sigma2):
    """Vectorized FG log-density.

    All arguments broadcast: ``x``, ``c`` and ``mu`` carry the coordinate on
    their last axis, ``r``, ``tau`` and ``sigma2`` have the matching leading
    shape.

    The Bessel normalizer of the posterior concentration
    ``kappa = |tau mu + r (x - c) / sigma2|`` is taken in scaled form and the
    Gaussian exponent is rearranged so that the two large terms it would
    otherwise cancel against never get formed.
    """
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    r = np.asarray(r, dtype=float)
    tau = np.asarray(tau, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    d = x.shape[-1]

    diff = x - c
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    v = (sigma2 * tau)[..., None] * mu + r[..., None] * diff
    q = np.sqrt(np.sum(v * v, axis=-1))  # sigma2 * kappa
    kappa = q / sigma2
    kappa = np.where(kappa < 1e-12, 0.0, kappa)

    # r |x-c| - sigma2 kappa, as a ratio with no cancellation
    num = sigma2 * tau * (sigma2 * tau + 2.0 * r * np.sum(mu * diff, axis=-1))
    den = r * dist + q
    gap = np.where(den > 0, -num / np.where(den > 0, den, 1.0), 0.0)
    expo = -((dist - r) ** 2 + 2.0 * gap) / (2.0 * sigma2)

    return log_cd(d, tau) - log_cd_scaled(d, kappa) - 0.5 * d * (LOG_2PI + np.log(sigma2)) + expo


def fg_logpdf(x, p: FgParams):
    """FG log-density at ``x`` (shape ``(d,)`` or ``(n, d)``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.d:
        raise ValueError(f"dimension mismatch: x has {x.shape[-1]}, kernel has {p.d}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input coordinates")
    return log_fg(x, p.c, p.r, p.vmf.mu, p.vmf.tau, p.sigma2)


def fg_sample(p: FgParams, n, rng, sigma2=None):
    """``n`` draws of ``c + r y + eps`` with ``y ~ vMF`` and ``eps ~ N(0, sigma2 I)``.

    ``sigma2`` overrides ``p.sigma2`` (``0`` gives noiseless sphere points).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    s2 = p.sigma2 if sigma2 is None else sigma2
    y = sample_vmf(p.vmf.mu, p.vmf.tau, rng, size=n)
    noise = np.sqrt(s2) * rng.standard_normal((n, p.d)) if s2 > 0 else 0.0
    return p.c + p.r * y + noise


def fg_bounds(x, p: FgParams):
    """Log lower/upper Gaussian envelopes of the FG density.

    For d > 2: ``phi(|x-c| + r) <= FG <= 2 phi(|x-c| - r)`` with ``phi`` the
    radial Gaussian profile; for d = 2 the envelopes are widened by
    ``exp(-2 tau)`` and ``exp(2 tau)``.
    """
    x = np.asarray(x, dtype=float)
    d = p.d
    dist = np.linalg.norm(x - p.c, axis=-1)
    base = -0.5 * d * (LOG_2PI + np.log(p.sigma2))
    lower = base - (dist + p.r) ** 2 / (2.0 * p.sigma2)
    upper = np.log(2.0) + base - (dist - p.r) ** 2 / (2.0 * p.sigma2)
    if d == 2:
        lower = lower - 2.0 * p.vmf.tau
        upper = upper + 2.0 * p.vmf.tau
    return lower, upper
