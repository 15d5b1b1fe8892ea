"""Log-scale modified Bessel functions and von Mises-Fisher normalizers.

Everything here works on the natural-log scale. Arguments of the size met in
the sampler (``r * |x - c| / sigma^2`` easily exceeds 1e4) overflow ``I_nu``
itself, so the exponentially scaled ``ive`` is used and the scale is added
back in log space.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln, i0e, i1e, ive, logsumexp

LOG_2PI = float(np.log(2.0 * np.pi))

# below this, ive() is in (or near) the subnormal range and loses precision
_IVE_FLOOR = 1e-290
_SERIES_TERMS = 80


def _log_series(order, x):
    """Ascending series for log I_nu(x), used only where ive underflows."""
    m = np.arange(_SERIES_TERMS, dtype=float)
    order = order[..., None]
    x = x[..., None]
    half = np.log(x / 2.0)
    terms = (2.0 * m + order) * half - gammaln(m + 1.0) - gammaln(m + order + 1.0)
    return logsumexp(terms, axis=-1)


def _log_iv(order, x):
    """log I_nu(x) for order >= -0.5 and x >= 0 (no argument checks)."""
    order, x = np.broadcast_arrays(np.asarray(order, dtype=float), np.asarray(x, dtype=float))
    out = np.empty(x.shape, dtype=float)
    zero = x == 0.0
    out[zero] = np.where(order[zero] == 0.0, 0.0, -np.inf)
    pos = ~zero
    if not np.any(pos):
        return out[()] if out.ndim == 0 else out

    o = order[pos]
    z = x[pos]
    res = np.empty(z.shape, dtype=float)

    if np.all(o == 0.0):
        res = np.log(i0e(z)) + z
    elif np.all(o == 1.0):
        v = i1e(z)
        res = np.log(v) + z
        bad = v < _IVE_FLOOR
        if np.any(bad):
            res[bad] = _log_series(o[bad], z[bad])
    elif np.all(o == 0.5):
        # I_{1/2}(z) = sqrt(2 / (pi z)) sinh z
        res = 0.5 * np.log(2.0 / (np.pi * z)) + z - np.log(2.0) + np.log(-np.expm1(-2.0 * z))
    else:
        v = ive(o, z)
        with np.errstate(divide="ignore"):
            res = np.log(v) + z
        bad = ~(v >= _IVE_FLOOR) | ~np.isfinite(res)
        if np.any(bad):
            res[bad] = _log_series(o[bad], z[bad])

    out[pos] = res
    return out[()] if out.ndim == 0 else out


def log_bessel_i(order, x):
    """Natural log of the modified Bessel function of the first kind.

    Parameters
    ----------
    order : float or ndarray
        Order ``nu >= 0``.
    x : float or ndarray
        Argument ``x >= 0``. Broadcast against ``order``.

    Returns
    -------
    float or ndarray
        ``log I_nu(x)``; ``0`` at ``x = 0, nu = 0`` and ``-inf`` at
        ``x = 0, nu > 0``.
    """
    order_a = np.asarray(order, dtype=float)
    x_a = np.asarray(x, dtype=float)
    if np.any(order_a < 0) or np.any(np.isnan(order_a)):
        raise ValueError("Bessel order must be >= 0")
    if np.any(x_a < 0) or np.any(np.isnan(x_a)):
        raise ValueError("Bessel argument must be >= 0")
    return _log_iv(order_a, x_a)


def _check_dim(d):
    if int(d) != d or d < 2:
        raise ValueError(f"sphere dimension d must be an integer >= 2, got {d}")
    return int(d)


def log_cd_zero(d):
    """log C_d(0): the uniform log-density on the unit (d-1)-sphere."""
    nu = d / 2.0 - 1.0
    return nu * np.log(2.0) + gammaln(nu + 1.0) - 0.5 * d * LOG_2PI


def log_cd(d, tau):
    """log of the vMF normalizer ``C_d(tau) = tau^(d/2-1) (2 pi)^(-d/2) / I_(d/2-1)(tau)``.

    The ``tau = 0`` value is the analytic limit (uniform density on the sphere).
    """
    d = _check_dim(d)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(np.isnan(tau)):
        raise ValueError("concentration must be >= 0")
    nu = d / 2.0 - 1.0
    safe = np.where(tau > 0, tau, 1.0)
    val = nu * np.log(safe) - 0.5 * d * LOG_2PI - _log_iv(nu, safe)
    out = np.where(tau > 0, val, log_cd_zero(d))
    return out[()] if out.ndim == 0 else out


def log_cd_scaled(d, tau):
    """``log C_d(tau) + tau`` without forming ``exp(tau)``.

    Pairs with the Gaussian exponent in the FG density, where the ``+tau``
    cancels most of ``-(|x - c|^2 + r^2) / (2 sigma^2)``.
    """
    tau = np.asarray(tau, dtype=float)
    nu = d / 2.0 - 1.0
    safe = np.where(tau > 0, tau, 1.0)
    if nu == 0.0:
        log_ie = np.log(i0e(safe))
    elif nu == 0.5:
        log_ie = 0.5 * np.log(2.0 / (np.pi * safe)) - np.log(2.0) + np.log(-np.expm1(-2.0 * safe))
    else:
        log_ie = _log_iv(nu, safe) - safe
    val = nu * np.log(safe) - 0.5 * d * LOG_2PI - log_ie
    out = np.where(tau > 0, val, log_cd_zero(d))
    return out[()] if out.ndim == 0 else out


def bessel_ratio(d, tau):
    """Mean resultant length of a vMF: ``A_d(tau) = I_(d/2)(tau) / I_(d/2-1)(tau)``."""
    d = _check_dim(d)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0) or np.any(np.isnan(tau)):
        raise ValueError("concentration must be >= 0")
    safe = np.where(tau > 0, tau, 1.0)
    nu = d / 2.0 - 1.0
    ratio = np.exp(_log_iv(nu + 1.0, safe) - _log_iv(nu, safe))
    out = np.where(tau > 0, np.minimum(ratio, np.nextafter(1.0, 0.0)), 0.0)
    return out[()] if out.ndim == 0 else out
