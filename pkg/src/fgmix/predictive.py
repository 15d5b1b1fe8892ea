"""Posterior-predictive density, predictive draws, and density-based classification."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .directional import sample_vmf
from .gibbs import mixture_loglik
from .model import ModelState, Trace, draw_base_blocks


class DensityModel:
    """Posterior predictive built from a sampler trace.

    For each retained state the predictive is the Chinese-restaurant mixture
    ``sum_l n_l / (n + alpha) f_l(x) + alpha / (n + alpha) f_new(x)``, with
    ``f_new`` the base-measure average of a sphere mixture estimated from
    ``n_prior_draws`` fixed draws. States are averaged with equal weight.
    """

    def __init__(self, trace: Trace, n_prior_draws: int = 100, include_new_sphere: bool = True, seed=0,
                 max_states: int | None = None):
        if len(trace.states) == 0:
            raise ValueError("trace has no states")
        states = list(trace.states)
        if max_states is not None and len(states) > max_states:
            idx = np.linspace(0, len(states) - 1, max_states).round().astype(int)
            states = [states[i] for i in idx]
        self.states: list[ModelState] = states
        self.hyper = trace.hyper
        self.d = states[0].d
        self.n_prior_draws = int(n_prior_draws)
        self.include_new_sphere = include_new_sphere and self.n_prior_draws > 0
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.prior_blocks = draw_base_blocks(self.hyper, self.d, self.n_prior_draws, rng)

    def _state_logpdf(self, x, st: ModelState):
        n, alpha = st.n, self.hyper.alpha
        logw = np.log(st.counts() / (n + alpha))
        occ = mixture_loglik(x, st.centers, st.radii, st.weights, st.mus, st.taus, st.sigma2)
        val = logsumexp(logw + occ, axis=1)
        if self.include_new_sphere:
            pb = self.prior_blocks
            new = mixture_loglik(x, pb["centers"], pb["radii"], pb["weights"], pb["mus"], pb["taus"], st.sigma2)
            new = logsumexp(new, axis=1) - np.log(self.n_prior_draws) + np.log(alpha / (n + alpha))
            val = np.logaddexp(val, new)
        return val

    def logpdf(self, x):
        """Predictive log-density at ``x`` (``(d,)`` or ``(m, d)``)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.d:
            raise ValueError(f"dimension mismatch: x has {x.shape[1]}, model has {self.d}")
        per_state = np.stack([self._state_logpdf(x, st) for st in self.states])
        out = logsumexp(per_state, axis=0) - np.log(len(self.states))
        return out[0] if single else out

    def sample(self, m: int, rng):
        """``m`` draws from the posterior predictive."""
        if m < 1:
            raise ValueError("m must be >= 1")
        rng = np.random.default_rng(rng)
        d, alpha = self.d, self.hyper.alpha
        pick = rng.integers(len(self.states), size=m)
        c = np.empty((m, d))
        r = np.empty(m)
        mu = np.empty((m, d))
        tau = np.empty(m)
        s2 = np.empty(m)
        for si in np.unique(pick):
            rows = np.flatnonzero(pick == si)
            st = self.states[si]
            p = np.append(st.counts(), alpha) / (st.n + alpha)
            sph = rng.choice(st.L + 1, size=rows.size, p=p)
            old = sph < st.L
            ro, sp = rows[old], sph[old]
            ker = _choose_rows(st.weights[sp], rng)
            c[ro], r[ro] = st.centers[sp], st.radii[sp]
            mu[ro], tau[ro] = st.mus[sp, ker], st.taus[sp, ker]
            rn = rows[~old]
            if rn.size:
                blk = draw_base_blocks(self.hyper, d, rn.size, rng)
                ker = _choose_rows(blk["weights"], rng)
                idx = np.arange(rn.size)
                c[rn], r[rn] = blk["centers"], blk["radii"]
                mu[rn], tau[rn] = blk["mus"][idx, ker], blk["taus"][idx, ker]
            s2[rows] = st.sigma2
        y = sample_vmf(mu, tau, rng)
        return c + r[:, None] * y + np.sqrt(s2)[:, None] * rng.standard_normal((m, d))


def _choose_rows(probs, rng):
    """One categorical draw per row of ``probs``."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(probs.shape[0]) * cum[:, -1]
    return np.minimum((cum < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def predictive_logpdf(x, model: DensityModel):
    return model.logpdf(x)


def predictive_sample(model: DensityModel, m: int, rng):
    return model.sample(m, rng)


class Classifier:
    """Assigns each point to the class whose predictive density is highest."""

    def __init__(self, models: dict[int, DensityModel] | list[DensityModel], labels=None):
        if isinstance(models, dict):
            labels = list(models)
            models = [models[c] for c in labels]
        if labels is None:
            labels = list(range(len(models)))
        if len(models) < 2:
            raise ValueError("need at least two classes")
        if len({m.d for m in models}) != 1:
            raise ValueError("class models disagree on dimension")
        self.models = list(models)
        self.labels = np.asarray(labels)

    def class_logpdf(self, x):
        """``(m, n_classes)`` predictive log-densities."""
        return np.stack([np.atleast_1d(m.logpdf(x)) for m in self.models], axis=-1)

    def predict(self, x):
        scores = self.class_logpdf(x)
        # argmax returns the first maximum, so ties go to the lowest class index
        return self.labels[np.argmax(scores, axis=-1)]


def classify(x, clf: Classifier):
    x = np.asarray(x, dtype=float)
    out = clf.predict(np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out
