"""von Mises-Fisher distribution on the unit (d-1)-sphere."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .specfun import _log_iv, log_cd

DEFAULT_TAU_CAP = 1e4


@dataclass(frozen=True)
class VmfParams:
    mu: np.ndarray
    tau: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size < 2:
            raise ValueError("mu must be a vector of length >= 2")
        if abs(np.linalg.norm(mu) - 1.0) > 1e-12:
            raise ValueError("mu must have unit norm")
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError("tau must be finite and >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "tau", float(self.tau))

    @property
    def d(self) -> int:
        return self.mu.size


def normalize(v, axis=-1):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=axis, keepdims=True)


def vmf_logpdf(y, mu, tau):
    """Log-density of vMF(mu, tau) with respect to surface measure.

    ``y`` and ``mu`` broadcast over leading axes; the last axis is the
    ambient dimension.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if y.shape[-1] != mu.shape[-1]:
        raise ValueError(f"dimension mismatch: y has {y.shape[-1]}, mu has {mu.shape[-1]}")
    d = y.shape[-1]
    tau = np.asarray(tau, dtype=float)
    return log_cd(d, tau) + tau * np.sum(y * mu, axis=-1)


def _sample_w(tau, d, rng):
    """Wood (1994) rejection draw of the cosine ``w = <mu, y>``.

    Returns ``(w, 1 - w)``; the second is computed without cancellation so
    the tangent length ``sqrt(1 - w^2)`` stays accurate when tau is huge.
    """
    m = tau.shape[0]
    dm1 = d - 1.0
    b = dm1 / (2.0 * tau + np.sqrt(4.0 * tau**2 + dm1**2))
    x0 = (1.0 - b) / (1.0 + b)
    c = tau * x0 + dm1 * np.log1p(-(x0**2))

    w = np.empty(m)
    omw = np.empty(m)
    todo = np.arange(m)
    while todo.size:
        bb = b[todo]
        z = rng.beta(dm1 / 2.0, dm1 / 2.0, size=todo.size)
        denom = 1.0 - (1.0 - bb) * z
        one_minus = 2.0 * bb * z / denom
        cand = 1.0 - one_minus
        u = rng.random(todo.size)
        with np.errstate(divide="ignore"):
            ok = tau[todo] * cand + dm1 * np.log1p(-x0[todo] * cand) - c[todo] >= np.log(u)
        w[todo[ok]] = cand[ok]
        omw[todo[ok]] = one_minus[ok]
        todo = todo[~ok]
    return w, omw


def sample_vmf(mu, tau, rng, size=None):
    """Exact vMF draws.

    ``mu`` is ``(d,)`` or ``(m, d)`` and ``tau`` a scalar or ``(m,)``; each row
    gets its own parameters. With ``size`` and a single ``mu``, returns
    ``size`` draws from that one distribution.
    """
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    if single:
        m = 1 if size is None else int(size)
        mu = np.broadcast_to(mu, (m, mu.size))
    m, d = mu.shape
    tau = np.broadcast_to(np.asarray(tau, dtype=float), (m,)).astype(float)
    mu = normalize(mu)

    w, omw = _sample_w(tau, d, rng)
    tangent = rng.standard_normal((m, d - 1))
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    s = np.sqrt(omw * (2.0 - omw))
    y = np.empty((m, d))
    y[:, 0] = w
    y[:, 1:] = s[:, None] * tangent

    # Householder reflection taking e1 to mu
    u = -mu.copy()
    u[:, 0] += 1.0
    unorm2 = np.sum(u * u, axis=1)
    act = unorm2 > 1e-30
    proj = np.sum(u * y, axis=1)
    y[act] -= (2.0 * proj[act] / unorm2[act])[:, None] * u[act]
    y = normalize(y)
    if single and size is None:
        return y[0]
    return y


def vmf_tau_plugin(resultant_mean_length, d, tau_cap=DEFAULT_TAU_CAP):
    """Approximate ML concentration ``t (d - t) / (1 - t^2)``.

    Returns ``(tau_hat, capped)``; ``capped`` marks values clipped to
    ``tau_cap`` (including ``t >= 1``, where the formula is singular).
    """
    t = np.asarray(resultant_mean_length, dtype=float)
    if np.any(t < 0):
        raise ValueError("mean resultant length must be >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = t * (d - t) / (1.0 - t * t)
    capped = (t >= 1.0) | ~np.isfinite(raw) | (raw > tau_cap)
    tau_hat = np.where(capped, tau_cap, raw)
    if tau_hat.ndim == 0:
        return float(tau_hat), bool(capped)
    return tau_hat, capped


def vmf_conjugate_posterior(mu0, b, tau, data_sum):
    """Posterior of the mean direction under the conjugate vMF prior.

    With ``w = tau * (b * mu0 + sum_i y_i)`` the posterior is
    ``vMF(w / |w|, |w|)``. A zero ``w`` gives the uniform distribution,
    reported as ``(mu0, 0.0)``. Vectorized over leading axes of
    ``tau``/``data_sum``.
    """
    mu0 = np.asarray(mu0, dtype=float)
    data_sum = np.asarray(data_sum, dtype=float)
    tau = np.asarray(tau, dtype=float)
    w = tau[..., None] * (b * mu0 + data_sum)
    norm = np.linalg.norm(w, axis=-1)
    degenerate = norm <= 1e-300
    safe = np.where(degenerate, 1.0, norm)
    direction = np.where(degenerate[..., None], mu0, w / safe[..., None])
    conc = np.where(degenerate, 0.0, norm)
    if conc.ndim == 0:
        return direction, float(conc)
    return direction, conc


def log_tau_marginal_prior(tau, d, a, b):
    """Unnormalized log marginal prior density of the concentration.

    Integrating the mean direction out of
    ``p(mu, tau) ~ [tau^nu / I_nu(tau)]^a exp(b tau mu0'mu)`` leaves
    ``[tau^nu / I_nu(tau)]^a * I_nu(b tau) / (b tau)^nu``. Constants dropped;
    continuous at ``tau = 0``.
    """
    tau = np.asarray(tau, dtype=float)
    nu = d / 2.0 - 1.0
    safe = np.where(tau > 0, tau, 1.0)
    val = a * (nu * np.log(safe) - _log_iv(nu, safe)) + _log_iv(nu, b * safe) - nu * np.log(b * safe)
    # limit as tau -> 0 of the above: (a - 1) * log(2^nu Gamma(nu + 1))
    at_zero = (a - 1.0) * (nu * np.log(2.0) + gammaln(nu + 1.0))
    return np.where(tau > 0, val, at_zero)


class TauPrior:
    """Inverse-CDF sampler for the concentration's marginal prior.

    The density is tabulated on ``[0] + logspace(-6, log10(tau_cap))``
    (``n_grid`` nodes in total); between nodes the CDF is linear.
    """

    def __init__(self, d, a, b, tau_cap=DEFAULT_TAU_CAP, n_grid=2048):
        self.d, self.a, self.b, self.tau_cap = d, a, b, tau_cap
        self.grid = np.concatenate([[0.0], np.logspace(-6, np.log10(tau_cap), n_grid - 1)])
        logp = log_tau_marginal_prior(self.grid, d, a, b)
        p = np.exp(logp - logp.max())
        cell = 0.5 * (p[1:] + p[:-1]) * np.diff(self.grid)
        self.cdf = np.concatenate([[0.0], np.cumsum(cell)])
        self.cdf /= self.cdf[-1]

    def sample(self, rng, size=None):
        u = rng.random(size)
        return np.interp(u, self.cdf, self.grid)

    def logpdf(self, tau):
        """Unnormalized log density (constants cancel in MH ratios)."""
        return log_tau_marginal_prior(tau, self.d, self.a, self.b)


@lru_cache(maxsize=32)
def tau_prior(d, a, b, tau_cap=DEFAULT_TAU_CAP, n_grid=2048):
    return TauPrior(d, a, b, tau_cap, n_grid)
