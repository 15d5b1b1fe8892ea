"""Metropolis-within-Gibbs sampler for the two-layer FG mixture.

One sweep runs, in order: sphere labels (auxiliary-block update for DP
mixtures, Neal's Algorithm 8), centers, radii, kernel allocations, kernel
weights, latent sphere coordinates, noise variance, kernel mean directions,
kernel concentrations.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .directional import sample_vmf, vmf_conjugate_posterior, vmf_tau_plugin
from .fg_kernel import log_fg
from .model import (
    Hyperparams,
    ModelState,
    Trace,
    draw_base_blocks,
    initial_state,
    joint_data_loglik,
    sample_positive_normal,
)
from .specfun import LOG_2PI, log_cd

log = logging.getLogger(__name__)

_CHUNK = 1 << 20  # max elements per (n, L, M) log-density block


class SamplerError(RuntimeError):
    """The chain hit a non-finite likelihood; ``state`` is the offending state."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


@dataclass
class StepDiagnostics:
    iteration: int
    n_spheres: int
    loglik: float
    sigma2: float
    tau_accept_rate: np.ndarray  # per occupied kernel, 0/1 for a single sweep
    tau_capped: int = 0

    def to_dict(self):
        rates = self.tau_accept_rate
        return {
            "iter": self.iteration,
            "n_spheres": self.n_spheres,
            "loglik": self.loglik,
            "sigma2": self.sigma2,
            "tau_accept_rate": float(rates.mean()) if rates.size else None,
            "tau_accept": rates.tolist(),
            "tau_capped": self.tau_capped,
        }


def mixture_loglik(x, centers, radii, weights, mus, taus, sigma2):
    """log sum_k pi_k FG(x_i | c_l, r_l, mu_lk, tau_lk) for every point/sphere.

    ``x`` is ``(n, d)``; sphere arrays have leading length ``L``. Returns ``(n, L)``.
    """
    n = x.shape[0]
    L, M = weights.shape
    out = np.empty((n, L))
    if L == 0:
        return out
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    step = max(1, _CHUNK // max(1, L * M))
    for lo in range(0, n, step):
        xs = x[lo : lo + step, None, None, :]
        lf = log_fg(xs, centers[None, :, None, :], radii[None, :, None], mus[None], taus[None], sigma2)
        out[lo : lo + step] = logsumexp(logw[None] + lf, axis=2)
    return out


def _paired_mixture_loglik(x, centers, radii, weights, mus, taus, sigma2):
    """Like :func:`mixture_loglik` but pairing point ``i`` with block ``i``.

    ``centers`` is ``(n, J, d)`` etc.; returns ``(n, J)``.
    """
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    lf = log_fg(x[:, None, None, :], centers[:, :, None, :], radii[:, :, None], mus, taus, sigma2)
    return logsumexp(logw + lf, axis=2)


def _label_logweights(log_counts, ll_row, fresh_ll, log_alpha_j):
    """Unnormalized log P(s_i = l) over occupied then auxiliary labels."""
    return np.concatenate([log_counts + ll_row, log_alpha_j + fresh_ll])


def _categorical(logw, rng):
    top = logw.max()
    p = np.exp(logw - top)
    cum = np.cumsum(p)
    return int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))


def sphere_label_probs(state: ModelState, data, hyper: Hyperparams, i: int, fresh: dict):
    """Normalized allocation probabilities for observation ``i``.

    ``fresh`` holds ``J`` auxiliary blocks (arrays with leading length ``J``).
    If ``i`` is alone on its sphere, that sphere takes the first auxiliary
    slot and ``fresh`` slot 0 is ignored. Returned in the order: current
    spheres ``0..L-1``, then auxiliary slots.
    """
    data = np.asarray(data, dtype=float)
    counts = state.counts().astype(float)
    counts[state.s[i]] -= 1
    ll = mixture_loglik(data[i : i + 1], state.centers, state.radii, state.weights, state.mus, state.taus, state.sigma2)[0]
    fresh_ll = mixture_loglik(
        data[i : i + 1], fresh["centers"], fresh["radii"], fresh["weights"], fresh["mus"], fresh["taus"], state.sigma2
    )[0]
    old = state.s[i]
    if counts[old] == 0:
        fresh_ll[0] = ll[old]
    with np.errstate(divide="ignore"):
        logw = _label_logweights(np.log(counts), ll, fresh_ll, np.log(hyper.alpha / hyper.J))
    return np.exp(logw - logsumexp(logw))


def update_sphere_labels(state: ModelState, data, hyper: Hyperparams, rng) -> ModelState:
    """Resample every ``s_i`` sequentially; empty spheres are dropped at the end.

    Sphere parameters do not move during this step, so each point's mixture
    log-likelihood under every existing sphere is computed once up front; a
    sphere opened from an auxiliary block gets its column on creation. The
    ``J`` auxiliary blocks are redrawn from the base measure for every
    observation.
    """
    n, d = data.shape
    M, J = hyper.M, hyper.J
    L = state.L
    cap = L + n
    C = np.empty((cap, d))
    R = np.empty(cap)
    W = np.empty((cap, M))
    MU = np.empty((cap, M, d))
    TAU = np.empty((cap, M))
    C[:L], R[:L], W[:L], MU[:L], TAU[:L] = state.centers, state.radii, state.weights, state.mus, state.taus

    ll = np.empty((n, cap))
    ll[:, :L] = mixture_loglik(data, state.centers, state.radii, state.weights, state.mus, state.taus, state.sigma2)

    fresh = draw_base_blocks(hyper, d, n * J, rng)
    fresh = {
        "centers": fresh["centers"].reshape(n, J, d),
        "radii": fresh["radii"].reshape(n, J),
        "weights": fresh["weights"].reshape(n, J, M),
        "mus": fresh["mus"].reshape(n, J, M, d),
        "taus": fresh["taus"].reshape(n, J, M),
    }
    fresh_ll = _paired_mixture_loglik(
        data, fresh["centers"], fresh["radii"], fresh["weights"], fresh["mus"], fresh["taus"], state.sigma2
    )

    counts = np.zeros(cap, dtype=np.int64)
    counts[:L] = state.counts()
    with np.errstate(divide="ignore"):
        log_counts = np.log(counts.astype(float))
    log_alpha_j = np.log(hyper.alpha / J)
    s = state.s.copy()
    used = L

    for i in range(n):
        old = s[i]
        counts[old] -= 1
        log_counts[old] = np.log(counts[old]) if counts[old] > 0 else -np.inf
        singleton = counts[old] == 0
        row_fresh = fresh_ll[i].copy()
        if singleton:
            row_fresh[0] = ll[i, old]
        logw = _label_logweights(log_counts[:used], ll[i, :used], row_fresh, log_alpha_j)
        if not np.isfinite(logw.max()):
            log.warning("all allocation weights vanished for observation %d; drawing from the prior weights", i)
            with np.errstate(divide="ignore"):
                logw = np.concatenate([log_counts[:used], np.full(J, log_alpha_j)])
        choice = _categorical(logw, rng)

        if choice < used:
            new = choice
        elif singleton and choice == used:
            new = old
        else:
            j = choice - used
            new = used
            C[new] = fresh["centers"][i, j]
            R[new] = fresh["radii"][i, j]
            W[new] = fresh["weights"][i, j]
            MU[new] = fresh["mus"][i, j]
            TAU[new] = fresh["taus"][i, j]
            ll[:, new] = mixture_loglik(data, C[new : new + 1], R[new : new + 1], W[new : new + 1],
                                        MU[new : new + 1], TAU[new : new + 1], state.sigma2)[:, 0]
            used += 1
        s[i] = new
        counts[new] += 1
        log_counts[new] = np.log(counts[new])

    keep = np.flatnonzero(counts[:used] > 0)
    remap = np.full(used, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    state.centers, state.radii, state.weights = C[keep], R[keep], W[keep]
    state.mus, state.taus = MU[keep], TAU[keep]
    state.s = remap[s]
    return state


def center_posterior(state: ModelState, data, hyper: Hyperparams):
    """Gaussian full conditional of each center: ``(mean (L, d), variance (L,))``."""
    L, d = state.L, state.d
    counts = np.bincount(state.s, minlength=L)
    resid = data - state.radii[state.s, None] * state.y
    sums = np.stack([np.bincount(state.s, weights=resid[:, j], minlength=L) for j in range(d)], axis=1)
    var = 1.0 / (counts / state.sigma2 + 1.0 / hyper.sigma_c2)
    mean = var[:, None] * sums / state.sigma2
    return mean, var


def radius_posterior(state: ModelState, data, hyper: Hyperparams):
    """Location and variance of each radius's positive-normal full conditional."""
    L = state.L
    counts = np.bincount(state.s, minlength=L)
    proj = np.sum(state.y * (data - state.centers[state.s]), axis=1)
    sums = np.bincount(state.s, weights=proj, minlength=L)
    var = 1.0 / (counts / state.sigma2 + 1.0 / hyper.sigma_r2)
    mean = var * (hyper.mu_r / hyper.sigma_r2 + sums / state.sigma2)
    return mean, var


def update_centers(state: ModelState, data, hyper: Hyperparams, rng) -> ModelState:
    mean, var = center_posterior(state, data, hyper)
    state.centers = mean + np.sqrt(var)[:, None] * rng.standard_normal(mean.shape)
    return state


def update_radii(state: ModelState, data, hyper: Hyperparams, rng) -> ModelState:
    mean, var = radius_posterior(state, data, hyper)
    state.radii = sample_positive_normal(mean, np.sqrt(var), rng)
    return state


def kernel_allocation_logprobs(state: ModelState, data):
    """``(n, M)`` normalized log P(k_i = k) given each point's sphere."""
    s = state.s
    with np.errstate(divide="ignore"):
        logw = np.log(state.weights[s])
    lf = log_fg(data[:, None, :], state.centers[s][:, None, :], state.radii[s][:, None], state.mus[s], state.taus[s],
                state.sigma2)
    logp = logw + lf
    return logp - logsumexp(logp, axis=1, keepdims=True)


def update_kernel_allocations(state: ModelState, data, hyper: Hyperparams, rng) -> ModelState:
    logp = kernel_allocation_logprobs(state, data)
    state.k = np.argmax(logp + rng.gumbel(size=logp.shape), axis=1).astype(np.int64)
    return state


def update_kernel_weights(state: ModelState, hyper: Hyperparams, rng) -> ModelState:
    conc = hyper.a0 + state.kernel_counts()
    g = rng.standard_gamma(conc)
    state.weights = g / g.sum(axis=1, keepdims=True)
    return state


def latent_y_posterior(state: ModelState, data):
    """vMF full conditional of each ``y_i``: ``(mean direction (n, d), concentration (n,))``."""
    s, k = state.s, state.k
    v = (state.radii[s] / state.sigma2)[:, None] * (data - state.centers[s]) + state.taus[s, k][:, None] * state.mus[s, k]
    conc = np.linalg.norm(v, axis=1)
    flat = conc <= 1e-300
    direction = np.where(flat[:, None], np.eye(state.d)[0], v / np.where(flat, 1.0, conc)[:, None])
    return direction, np.where(flat, 0.0, conc)


def update_latent_y(state: ModelState, data, rng) -> ModelState:
    direction, conc = latent_y_posterior(state, data)
    state.y = sample_vmf(direction, conc, rng)
    return state


def sigma2_posterior(state: ModelState, data, hyper: Hyperparams):
    """Inverse-gamma full conditional of the noise variance: ``(shape, rate)``."""
    n, d = data.shape
    resid = data - state.centers[state.s] - state.radii[state.s, None] * state.y
    return hyper.a_sigma + 0.5 * n * d, hyper.b_sigma + 0.5 * float(np.sum(resid * resid))


def update_sigma2(state: ModelState, data, hyper: Hyperparams, rng) -> ModelState:
    shape, rate = sigma2_posterior(state, data, hyper)
    state.sigma2 = float(rate / rng.standard_gamma(shape))
    return state


def kernel_sums(state: ModelState):
    """Per-kernel member counts ``(L, M)`` and sums of latent coordinates ``(L, M, d)``."""
    L, M, d = state.L, state.M, state.d
    idx = state.s * M + state.k
    counts = np.bincount(idx, minlength=L * M).reshape(L, M)
    sums = np.stack([np.bincount(idx, weights=state.y[:, j], minlength=L * M) for j in range(d)], axis=1)
    return counts, sums.reshape(L, M, d)


def update_vmf_mu(state: ModelState, hyper: Hyperparams, rng) -> ModelState:
    L, M, d = state.L, state.M, state.d
    _, sums = kernel_sums(state)
    direction, conc = vmf_conjugate_posterior(hyper.mu0_vector(d), hyper.b, state.taus, sums)
    state.mus = sample_vmf(direction.reshape(L * M, d), conc.reshape(-1), rng).reshape(L, M, d)
    return state


def log_tau_conditional(tau, n_members, resultant, d, a):
    """Unnormalized log full conditional of a kernel concentration.

    ``resultant`` is ``(b mu0 + sum y)' mu`` for the kernel.
    """
    # tau^nu / I_nu(tau) = C_d(tau) (2 pi)^(d/2)
    return (a + n_members) * (log_cd(d, tau) + 0.5 * d * LOG_2PI) + tau * resultant


def log_gamma2_proposal(tau, tau_hat):
    """Gamma(shape 2, rate 2 / tau_hat) log-density up to a constant in ``tau``."""
    return np.log(tau) - 2.0 * tau / tau_hat + 2.0 * np.log(2.0 / tau_hat)


def tau_log_accept(tau, tau_prop, n_members, resultant, d, a, log_q_cur, log_q_prop):
    """Log acceptance ratio of the independence sampler (capped at 0)."""
    log_ratio = (
        log_tau_conditional(tau_prop, n_members, resultant, d, a)
        - log_tau_conditional(tau, n_members, resultant, d, a)
        + log_q_cur
        - log_q_prop
    )
    return np.minimum(0.0, log_ratio)


def update_vmf_tau(state: ModelState, hyper: Hyperparams, rng):
    """Independence-sampler MH for every kernel concentration.

    Occupied kernels propose from Gamma(2, rate 2 / tau_hat) with tau_hat the
    approximate ML estimate from the kernel's members; empty kernels propose
    from the concentration's marginal prior. Returns ``(state, accepted,
    occupied, n_capped)`` with boolean ``(L, M)`` masks.
    """
    d = state.d
    counts, sums = kernel_sums(state)
    mu0 = hyper.mu0_vector(d)
    resultant = np.sum((hyper.b * mu0 + sums) * state.mus, axis=-1)
    occupied = counts > 0
    tbar = np.where(occupied, np.linalg.norm(sums, axis=-1) / np.maximum(counts, 1), 0.0)
    tau_hat, capped = vmf_tau_plugin(tbar, d, hyper.tau_cap)
    occupied &= tau_hat > 0

    tau = state.taus
    prior = hyper.tau_prior(d)
    safe_hat = np.where(occupied, tau_hat, 1.0)
    gamma_prop = rng.gamma(2.0, safe_hat / 2.0)
    prior_prop = prior.sample(rng, size=tau.shape)
    tau_prop = np.where(occupied, gamma_prop, prior_prop)

    with np.errstate(divide="ignore"):
        log_q_cur = np.where(occupied, log_gamma2_proposal(tau, safe_hat), prior.logpdf(tau))
        log_q_prop = np.where(occupied, log_gamma2_proposal(tau_prop, safe_hat), prior.logpdf(tau_prop))
    log_acc = tau_log_accept(tau, tau_prop, counts, resultant, d, hyper.a, log_q_cur, log_q_prop)
    accept = np.log(rng.random(tau.shape)) < log_acc
    state.taus = np.where(accept, tau_prop, tau)
    return state, accept, counts > 0, int(np.sum(capped & (counts > 0)))


def sweep(state: ModelState, data, hyper: Hyperparams, rng):
    """One full pass over all conditional updates; returns ``(state, accept, occupied, n_capped)``."""
    update_sphere_labels(state, data, hyper, rng)
    update_centers(state, data, hyper, rng)
    update_radii(state, data, hyper, rng)
    update_kernel_allocations(state, data, hyper, rng)
    update_kernel_weights(state, hyper, rng)
    update_latent_y(state, data, rng)
    update_sigma2(state, data, hyper, rng)
    update_vmf_mu(state, hyper, rng)
    return update_vmf_tau(state, hyper, rng)


def run_chain(data, hyper: Hyperparams, rng, *, diagnostics_path=None, init: ModelState | None = None,
              init_method: str = "random", meta=None, callback=None) -> Trace:
    """Run ``hyper.n_iter`` sweeps and keep every ``thin``-th post-burn-in state.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed. Per-sweep
    diagnostics go to ``diagnostics_path`` as JSON lines when given, and to
    ``callback(StepDiagnostics)`` when given.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError("need an (n, d) array with n >= 2 and d >= 2")
    if not np.all(np.isfinite(data)):
        raise ValueError("data contain non-finite values")
    hyper.validate(data.shape[1])
    seed = rng if isinstance(rng, (int, np.integer)) else None
    rng = np.random.default_rng(rng)

    state = init.copy() if init is not None else initial_state(data, hyper, rng, init_method)
    states = []
    diag_file = open(diagnostics_path, "w") if diagnostics_path is not None else None
    try:
        for it in range(1, hyper.n_iter + 1):
            state, accept, occupied, n_capped = sweep(state, data, hyper, rng)
            state.iteration = it
            loglik = joint_data_loglik(state, data)
            if not np.isfinite(loglik) or not np.isfinite(state.sigma2):
                raise SamplerError(f"non-finite likelihood at sweep {it}", state.copy())
            diag = StepDiagnostics(it, state.L, loglik, state.sigma2, accept[occupied].astype(float), n_capped)
            if diag_file is not None:
                diag_file.write(json.dumps(diag.to_dict()) + "\n")
            if callback is not None:
                callback(diag)
            if it > hyper.burn_in and (it - hyper.burn_in) % hyper.thin == 0:
                states.append(state.copy())
    finally:
        if diag_file is not None:
            diag_file.close()

    info = {"seed": seed, "n": int(data.shape[0]), "d": int(data.shape[1]), "n_iter": hyper.n_iter,
            "burn_in": hyper.burn_in, "thin": hyper.thin}
    if meta:
        info.update(meta)
    return Trace(states=states, hyper=hyper, meta=info)
