"""State of the two-layer FG mixture: spheres, kernels, labels, latent
sphere coordinates, the shared noise variance, and the fixed prior constants.

Labels are 0-based: ``s[i]`` indexes a row of ``centers`` and ``k[i]`` a
kernel slot in ``0..M-1``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from typing import Any
import warnings

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.special import log_ndtr

from .directional import sample_vmf, tau_prior, vmf_logpdf
from .specfun import LOG_2PI


@dataclass
class Hyperparams:
    alpha: float = 1.0
    J: int = 1
    M: int = 5
    a0: float = 1.0
    mu0: tuple[float, ...] | None = None  # None -> (1/sqrt(d), ..., 1/sqrt(d))
    a: float = 1.0
    b: float = 0.1
    sigma_c2: float = 1.0
    mu_r: float = 1.0
    sigma_r2: float = 25.0
    a_sigma: float = 1.0
    b_sigma: float = 0.01
    tau_cap: float = 1e4
    n_tau_grid: int = 2048
    n_iter: int = 5000
    burn_in: int = 2000
    thin: int = 5

    def validate(self, d: int | None = None) -> "Hyperparams":
        positive = ["alpha", "a0", "sigma_c2", "sigma_r2", "a_sigma", "b_sigma", "tau_cap"]
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not self.a > self.b > 0:
            raise ValueError("conjugate vMF prior needs a > b > 0")
        for name in ("J", "M", "thin", "n_tau_grid"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_iter < 1 or not 0 <= self.burn_in < self.n_iter:
            raise ValueError("need n_iter >= 1 and 0 <= burn_in < n_iter")
        if self.mu0 is not None:
            mu0 = np.asarray(self.mu0, dtype=float)
            if abs(np.linalg.norm(mu0) - 1.0) > 1e-9:
                raise ValueError("mu0 must be a unit vector")
            if d is not None and mu0.size != d:
                raise ValueError(f"mu0 has dimension {mu0.size}, data has {d}")
        return self

    def mu0_vector(self, d: int) -> np.ndarray:
        if self.mu0 is None:
            return np.full(d, 1.0 / np.sqrt(d))
        return np.asarray(self.mu0, dtype=float)

    def tau_prior(self, d: int):
        return tau_prior(d, float(self.a), float(self.b), float(self.tau_cap), int(self.n_tau_grid))

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        if self.mu0 is not None:
            out["mu0"] = [float(v) for v in self.mu0]
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown hyperparameters: {sorted(unknown)}")
        data = dict(data)
        if data.get("mu0") is not None:
            data["mu0"] = tuple(float(v) for v in data["mu0"])
        for name in ("J", "M", "n_tau_grid", "n_iter", "burn_in", "thin"):
            if name in data:
                data[name] = int(data[name])
        return cls(**data)


@dataclass
class SphereBlock:
    c: np.ndarray
    r: float
    pi: np.ndarray
    mus: np.ndarray  # (M, d)
    taus: np.ndarray  # (M,)


@dataclass
class ModelState:
    centers: np.ndarray  # (L, d)
    radii: np.ndarray  # (L,)
    weights: np.ndarray  # (L, M)
    mus: np.ndarray  # (L, M, d)
    taus: np.ndarray  # (L, M)
    s: np.ndarray  # (n,) int
    k: np.ndarray  # (n,) int
    y: np.ndarray | None  # (n, d); None when loaded from a trace saved without latents
    sigma2: float
    iteration: int = 0

    @property
    def n(self) -> int:
        return self.s.size

    @property
    def d(self) -> int:
        return self.centers.shape[1]

    @property
    def L(self) -> int:
        return self.centers.shape[0]

    @property
    def M(self) -> int:
        return self.weights.shape[1]

    @property
    def spheres(self) -> list[SphereBlock]:
        return [
            SphereBlock(self.centers[l], float(self.radii[l]), self.weights[l], self.mus[l], self.taus[l])
            for l in range(self.L)
        ]

    def counts(self) -> np.ndarray:
        return np.bincount(self.s, minlength=self.L)

    def kernel_counts(self) -> np.ndarray:
        return np.bincount(self.s * self.M + self.k, minlength=self.L * self.M).reshape(self.L, self.M)

    def copy(self) -> "ModelState":
        return ModelState(
            self.centers.copy(),
            self.radii.copy(),
            self.weights.copy(),
            self.mus.copy(),
            self.taus.copy(),
            self.s.copy(),
            self.k.copy(),
            None if self.y is None else self.y.copy(),
            float(self.sigma2),
            self.iteration,
        )

    def check(self) -> None:
        """Raise AssertionError if any structural invariant fails."""
        L, M = self.L, self.M
        assert self.radii.shape == (L,) and self.mus.shape == (L, M, self.d) and self.taus.shape == (L, M)
        assert np.all((self.s >= 0) & (self.s < L)), "sphere label out of range"
        assert np.all((self.k >= 0) & (self.k < M)), "kernel label out of range"
        counts = self.counts()
        assert np.all(counts >= 1), "empty sphere present"
        assert counts.sum() == self.n
        assert np.array_equal(self.kernel_counts().sum(axis=1), counts)
        assert np.all(self.weights >= 0) and np.allclose(self.weights.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(self.radii > 0), "radius must be positive"
        assert self.sigma2 > 0
        assert np.all(self.taus >= 0) and np.all(np.isfinite(self.taus))
        assert np.allclose(np.linalg.norm(self.mus, axis=-1), 1.0, atol=1e-12)
        if self.y is not None:
            assert np.allclose(np.linalg.norm(self.y, axis=1), 1.0, atol=1e-12)

    def to_dict(self, save_latent: bool = False) -> dict[str, Any]:
        out = {
            "iter": int(self.iteration),
            "sigma2": float(self.sigma2),
            "spheres": [
                {
                    "c": self.centers[l].tolist(),
                    "r": float(self.radii[l]),
                    "pi": self.weights[l].tolist(),
                    "kernels": [
                        {"mu": self.mus[l, m].tolist(), "tau": float(self.taus[l, m])} for m in range(self.M)
                    ],
                }
                for l in range(self.L)
            ],
            "s": self.s.tolist(),
            "k": self.k.tolist(),
        }
        if save_latent and self.y is not None:
            out["y"] = self.y.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelState":
        spheres = data["spheres"]
        y = data.get("y")
        return cls(
            centers=np.array([sp["c"] for sp in spheres], dtype=float),
            radii=np.array([sp["r"] for sp in spheres], dtype=float),
            weights=np.array([sp["pi"] for sp in spheres], dtype=float),
            mus=np.array([[kn["mu"] for kn in sp["kernels"]] for sp in spheres], dtype=float),
            taus=np.array([[kn["tau"] for kn in sp["kernels"]] for sp in spheres], dtype=float),
            s=np.array(data["s"], dtype=np.int64),
            k=np.array(data["k"], dtype=np.int64),
            y=None if y is None else np.array(y, dtype=float),
            sigma2=float(data["sigma2"]),
            iteration=int(data.get("iter", 0)),
        )


@dataclass
class Trace:
    states: list[ModelState]
    hyper: Hyperparams
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)


def sample_positive_normal(mean, sd, rng):
    """Draws from N(mean, sd^2) truncated to (0, inf), vectorized.

    Plain rejection when ``mean >= 0`` (acceptance >= 1/2); otherwise
    Robert's (1995) translated-exponential proposal on the standardized
    lower bound, which stays efficient far into the tail.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    sd = np.broadcast_to(np.asarray(sd, dtype=float), mean.shape)
    out = np.empty(mean.shape)
    direct = mean >= 0
    todo = np.flatnonzero(direct)
    while todo.size:
        z = mean[todo] + sd[todo] * rng.standard_normal(todo.size)
        ok = z > 0
        out[todo[ok]] = z[ok]
        todo = todo[~ok]

    todo = np.flatnonzero(~direct)
    while todo.size:
        lo = -mean[todo] / sd[todo]
        lam = 0.5 * (lo + np.sqrt(lo * lo + 4.0))
        z = lo + rng.exponential(1.0 / lam)
        ok = rng.random(todo.size) <= np.exp(-0.5 * (z - lam) ** 2)
        val = mean[todo] + sd[todo] * z
        ok &= val > 0
        out[todo[ok]] = val[ok]
        todo = todo[~ok]
    return out


def positive_normal_mean(mean, sd):
    """E[X] for X ~ N(mean, sd^2) truncated to (0, inf)."""
    a = mean / sd
    return mean + sd * np.exp(-0.5 * a * a - 0.5 * LOG_2PI - log_ndtr(a))


def draw_base_blocks(hyper: Hyperparams, d: int, m: int, rng) -> dict[str, np.ndarray]:
    """``m`` independent sphere blocks from the base measure and kernel priors."""
    M = hyper.M
    centers = np.sqrt(hyper.sigma_c2) * rng.standard_normal((m, d))
    radii = sample_positive_normal(np.full(m, hyper.mu_r), np.sqrt(hyper.sigma_r2), rng)
    weights = rng.dirichlet(np.full(M, hyper.a0), size=m) if m else np.empty((0, M))
    taus = hyper.tau_prior(d).sample(rng, size=(m, M))
    mu0 = hyper.mu0_vector(d)
    mus = sample_vmf(np.broadcast_to(mu0, (m * M, d)), hyper.b * taus.reshape(-1), rng).reshape(m, M, d)
    return {"centers": centers, "radii": radii, "weights": weights, "mus": mus, "taus": taus}


def draw_sphere_from_base(hyper: Hyperparams, d: int, rng) -> SphereBlock:
    blk = draw_base_blocks(hyper, d, 1, rng)
    return SphereBlock(blk["centers"][0], float(blk["radii"][0]), blk["weights"][0], blk["mus"][0], blk["taus"][0])


def initial_state(data: np.ndarray, hyper: Hyperparams, rng, method: str = "random") -> ModelState:
    """Starting state with ceil(sqrt(n)) spheres.

    Points are split into groups either uniformly at random (``"random"``) or
    by k-means (``"kmeans"``); each group gets a sphere centred at its mean
    with radius the mean distance to it.
    """
    data = np.asarray(data, dtype=float)
    n, d = data.shape
    n_groups = min(n, int(np.ceil(np.sqrt(n))))
    sigma2 = hyper.b_sigma / hyper.a_sigma
    if method == "random":
        labels = rng.permutation(np.arange(n) % n_groups)
    elif method == "kmeans":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # empty k-means clusters are dropped below
            _, labels = kmeans2(data, n_groups, minit="++", rng=rng)
    else:
        raise ValueError(f"unknown init method {method!r}")
    _, s = np.unique(labels, return_inverse=True)
    L = s.max() + 1
    centers = np.array([data[s == l].mean(axis=0) for l in range(L)])
    diff = data - centers[s]
    dist = np.linalg.norm(diff, axis=1)
    radii = np.bincount(s, weights=dist, minlength=L) / np.bincount(s, minlength=L)
    radii = np.maximum(radii, np.sqrt(sigma2))

    y = np.empty((n, d))
    ok = dist > 1e-12
    y[ok] = diff[ok] / dist[ok, None]
    if np.any(~ok):
        y[~ok] = sample_vmf(np.eye(d)[0], 0.0, rng, size=int((~ok).sum()))

    blk = draw_base_blocks(hyper, d, L, rng)
    k = rng.integers(0, hyper.M, size=n)
    return ModelState(
        centers=centers,
        radii=radii,
        weights=blk["weights"],
        mus=blk["mus"],
        taus=blk["taus"],
        s=s.astype(np.int64),
        k=k.astype(np.int64),
        y=y,
        sigma2=float(sigma2),
    )


def joint_data_loglik(state: ModelState, data: np.ndarray) -> float:
    """log p(x | s, k, y, params) + log p(y | s, k, params)."""
    data = np.asarray(data, dtype=float)
    if data.shape != (state.n, state.d):
        raise ValueError("data shape does not match the state")
    if state.y is None:
        raise ValueError("state carries no latent coordinates")
    if np.any(state.s >= state.L) or np.any(state.k >= state.M) or np.any(state.s < 0) or np.any(state.k < 0):
        raise ValueError("label inconsistency")
    d = state.d
    resid = data - state.centers[state.s] - state.radii[state.s, None] * state.y
    gauss = -0.5 * d * (LOG_2PI + np.log(state.sigma2)) - np.sum(resid**2, axis=1) / (2.0 * state.sigma2)
    vmf = vmf_logpdf(state.y, state.mus[state.s, state.k], state.taus[state.s, state.k])
    return float(np.sum(gauss) + np.sum(vmf))
