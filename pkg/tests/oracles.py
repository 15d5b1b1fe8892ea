"""Independent reference implementations used only by the tests.

Each oracle is written straight from the model definitions, avoiding the
package's vectorized/stabilized code paths: arbitrary-precision Bessel
functions, direct quadrature of the FG convolution, and naive loops for the
conditional posteriors.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.special import roots_legendre

mp.mp.dps = 40


# --- special functions ----------------------------------------------------

def mp_log_iv(order, x):
    """log I_nu(x) to ~40 digits."""
    return float(mp.log(mp.besseli(mp.mpf(order), mp.mpf(x))))


def series_iv(order, x, tol=1e-20):
    """Ascending power series sum_m (x/2)^(2m+nu) / (m! Gamma(nu+m+1)), in mpmath."""
    x = mp.mpf(x)
    nu = mp.mpf(order)
    total, m = mp.mpf(0), 0
    while True:
        term = (x / 2) ** (2 * m + nu) / (mp.factorial(m) * mp.gamma(nu + m + 1))
        total += term
        if m > 5 and term < tol * total:
            return total
        m += 1


def mp_log_cd(d, tau):
    nu = mp.mpf(d) / 2 - 1
    tau = mp.mpf(tau)
    return float(nu * mp.log(tau) - mp.mpf(d) / 2 * mp.log(2 * mp.pi) - mp.log(mp.besseli(nu, tau)))


# --- FG convolution by quadrature -----------------------------------------

def _sphere_grid(d, mu, n_nodes):
    """Quadrature nodes/weights on the unit (d-1)-sphere (d in {2, 3}), oriented so
    the first polar axis is ``mu`` (where the vMF factor is sharpest)."""
    if d == 2:
        theta = 2.0 * np.pi * np.arange(n_nodes) / n_nodes
        base = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        rot = np.array([[mu[0], -mu[1]], [mu[1], mu[0]]])
        return base @ rot.T, np.full(n_nodes, 2.0 * np.pi / n_nodes)
    t, wt = roots_legendre(n_nodes)  # t = cos(polar angle from mu)
    phi = 2.0 * np.pi * np.arange(2 * n_nodes) / (2 * n_nodes)
    T, P = np.meshgrid(t, phi, indexing="ij")
    st = np.sqrt(1.0 - T * T)
    base = np.stack([T, st * np.cos(P), st * np.sin(P)], axis=-1).reshape(-1, 3)
    w = (wt[:, None] * np.full(phi.size, 2.0 * np.pi / phi.size)[None, :]).reshape(-1)
    # orthonormal frame with mu first
    q, _ = np.linalg.qr(np.column_stack([mu, np.eye(3)]))
    frame = q[:, :3] * np.sign(q[:, 0] @ mu)
    return base @ frame.T, w


def fg_logpdf_quadrature(x, c, r, mu, tau, sigma2, n_nodes=None):
    """log of int vMF(y | mu, tau) N(x | c + r y, sigma2 I) dS(y), by direct quadrature."""
    x, c, mu = (np.asarray(v, dtype=float) for v in (x, c, mu))
    d = x.size
    if n_nodes is None:
        n_nodes = 4000 if d == 2 else 400
    y, w = _sphere_grid(d, mu, n_nodes)
    nu = d / 2 - 1
    if tau > 0:
        log_c = nu * math.log(tau) - d / 2 * math.log(2 * math.pi) - mp_log_iv(nu, tau)
    else:
        log_c = math.lgamma(d / 2) - math.log(2) - d / 2 * math.log(math.pi)
    resid = x - c - r * y
    log_int = (log_c + tau * (y @ mu) - d / 2 * math.log(2 * math.pi * sigma2)
               - np.sum(resid * resid, axis=1) / (2 * sigma2))
    top = log_int.max()
    return float(top + math.log(np.sum(w * np.exp(log_int - top))))


def fg_logpdf_naive(x, c, r, mu, tau, sigma2):
    """The closed-form FG log-density written term by term (no stabilization)."""
    x, c, mu = (np.asarray(v, dtype=float) for v in (x, c, mu))
    d = x.size
    kappa = np.linalg.norm(tau * mu + r * (x - c) / sigma2)

    def lcd(t):
        if t == 0:
            return math.lgamma(d / 2) - math.log(2) - d / 2 * math.log(math.pi)
        return mp_log_cd(d, t)

    return (lcd(tau) - lcd(kappa) - d / 2 * math.log(2 * math.pi * sigma2)
            - (np.sum((x - c) ** 2) + r * r) / (2 * sigma2))


def mixture_naive(x, c, r, pi, mus, taus, sigma2):
    """log sum_k pi_k FG(x | c, r, mu_k, tau_k) with explicit loops."""
    vals = [math.log(pi[k]) + fg_logpdf_naive(x, c, r, mus[k], taus[k], sigma2)
            for k in range(len(pi)) if pi[k] > 0]
    top = max(vals)
    return top + math.log(sum(math.exp(v - top) for v in vals))


# --- conditional posteriors -----------------------------------------------

def sphere_label_probs_naive(state, data, hyper, i, fresh):
    """Normalized allocation probabilities enumerated term by term.

    Occupied sphere l: n_{-i}^l * sum_k pi FG; auxiliary slot j: (alpha/J) *
    sum_k pi FG under the auxiliary block, where a singleton's own sphere
    fills auxiliary slot 0.
    """
    x = data[i]
    L = state.L
    w = []
    for l in range(L):
        n_minus = sum(1 for j in range(state.n) if j != i and state.s[j] == l)
        lik = math.exp(mixture_naive(x, state.centers[l], state.radii[l], state.weights[l], state.mus[l],
                                     state.taus[l], state.sigma2))
        w.append(n_minus * lik)
    own_alone = all(state.s[j] != state.s[i] for j in range(state.n) if j != i)
    for j in range(hyper.J):
        if j == 0 and own_alone:
            l = state.s[i]
            blk = (state.centers[l], state.radii[l], state.weights[l], state.mus[l], state.taus[l])
        else:
            blk = (fresh["centers"][j], fresh["radii"][j], fresh["weights"][j], fresh["mus"][j], fresh["taus"][j])
        w.append(hyper.alpha / hyper.J * math.exp(mixture_naive(x, *blk, state.sigma2)))
    w = np.array(w)
    return w / w.sum()


def center_posterior_naive(state, data, hyper, l):
    members = [i for i in range(state.n) if state.s[i] == l]
    var = 1.0 / (len(members) / state.sigma2 + 1.0 / hyper.sigma_c2)
    total = np.zeros(state.d)
    for i in members:
        total += data[i] - state.radii[l] * state.y[i]
    return var * total / state.sigma2, var


def radius_posterior_naive(state, data, hyper, l):
    members = [i for i in range(state.n) if state.s[i] == l]
    var = 1.0 / (len(members) / state.sigma2 + 1.0 / hyper.sigma_r2)
    total = 0.0
    for i in members:
        total += float(state.y[i] @ (data[i] - state.centers[l]))
    return var * (hyper.mu_r / hyper.sigma_r2 + total / state.sigma2), var


def kernel_probs_naive(state, data, i):
    l = state.s[i]
    w = np.array([state.weights[l, k] * math.exp(fg_logpdf_naive(data[i], state.centers[l], state.radii[l],
                                                                   state.mus[l, k], state.taus[l, k], state.sigma2))
                  for k in range(state.M)])
    return w / w.sum()


def latent_y_posterior_naive(state, data, i):
    l, k = state.s[i], state.k[i]
    v = state.radii[l] / state.sigma2 * (data[i] - state.centers[l]) + state.taus[l, k] * state.mus[l, k]
    norm = math.sqrt(sum(t * t for t in v))
    return v / norm, norm


def sigma2_posterior_naive(state, data, hyper):
    n, d = data.shape
    ss = 0.0
    for i in range(n):
        e = data[i] - state.centers[state.s[i]] - state.radii[state.s[i]] * state.y[i]
        ss += float(e @ e)
    return hyper.a_sigma + n * d / 2, hyper.b_sigma + ss / 2


def joint_loglik_naive(state, data):
    n, d = data.shape
    total = 0.0
    for i in range(n):
        l, k = state.s[i], state.k[i]
        e = data[i] - state.centers[l] - state.radii[l] * state.y[i]
        total += -d / 2 * math.log(2 * math.pi * state.sigma2) - float(e @ e) / (2 * state.sigma2)
        tau = state.taus[l, k]
        lc = (mp_log_cd(d, tau) if tau > 0
              else math.lgamma(d / 2) - math.log(2) - d / 2 * math.log(math.pi))
        total += lc + tau * float(state.mus[l, k] @ state.y[i])
    return total


def predictive_naive(x, states, alpha, prior_blocks):
    """Average over states of the DP predictive, enumerated by loops."""
    vals = []
    m = len(prior_blocks["radii"])
    for st in states:
        n = st.n
        dens = 0.0
        for l in range(st.L):
            n_l = int(np.sum(st.s == l))
            dens += n_l / (n + alpha) * math.exp(mixture_naive(x, st.centers[l], st.radii[l], st.weights[l],
                                                               st.mus[l], st.taus[l], st.sigma2))
        new = 0.0
        for j in range(m):
            new += math.exp(mixture_naive(x, prior_blocks["centers"][j], prior_blocks["radii"][j],
                                          prior_blocks["weights"][j], prior_blocks["mus"][j],
                                          prior_blocks["taus"][j], st.sigma2))
        dens += alpha / (n + alpha) * new / m
        vals.append(dens)
    return math.log(sum(vals) / len(vals))


def random_state(rng, n=6, d=2, L=2, M=3, sigma2=None):
    """A valid random ModelState with moderate parameters."""
    from fgmix.model import ModelState

    s = np.concatenate([np.arange(L), rng.integers(0, L, size=n - L)]).astype(np.int64)
    rng.shuffle(s)
    y = rng.standard_normal((n, d))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    mus = rng.standard_normal((L, M, d))
    mus /= np.linalg.norm(mus, axis=-1, keepdims=True)
    return ModelState(
        centers=rng.normal(size=(L, d)),
        radii=rng.uniform(0.5, 1.5, size=L),
        weights=rng.dirichlet(np.ones(M), size=L),
        mus=mus,
        taus=rng.uniform(0.1, 5.0, size=(L, M)),
        s=s,
        k=rng.integers(0, M, size=n).astype(np.int64),
        y=y,
        sigma2=float(sigma2 if sigma2 is not None else rng.uniform(0.1, 0.6)),
    )
