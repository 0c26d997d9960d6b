"""Gaussian-mixture prior with closed-form diffusion quantities.

For a prior p(x0) = sum_k w_k N(mu_k, I) every object the sampler needs is
analytic, which makes the mixture the reference problem for end-to-end
validation:

- the noised marginal q(x_t) is again a mixture with unchanged component
  variance under vp noising (alpha_bar * 1 + 1 - alpha_bar = 1), so the
  score is exact rather than learned;
- E[x0 | x_t] and the full posterior p(x0 | x_t) are mixtures with
  responsibilities shared with the score;
- the posterior p(x0 | y) under a linear-Gaussian measurement is a mixture
  whose components separate per coordinate in the whitened basis.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import measurement as ms
from ._kernels import gmm_logpdf, gmm_score
from .engine import DOMAIN_PROBLEM, substream

__all__ = [
    "GmmPrior",
    "GmmProblem",
    "gmm_score_source",
    "gmm_marginal_logpdf",
    "gmm_posterior_x0",
    "PosteriorMixture",
    "generate_problem",
    "whitened_prior",
    "gmm_exact_posterior",
    "gmm_exact_posterior_sample",
    "save_problem",
    "load_problem",
]


@dataclass(frozen=True, eq=False)
class GmmPrior:
    """Mixture sum_k weights[k] N(means[k], I)."""

    weights: np.ndarray
    means: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        mu = np.asarray(self.means, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        if mu.ndim != 2 or mu.shape[0] != len(w):
            raise ValueError("means must be (K, d) matching weights")
        if np.any(w <= 0.0) or not np.isclose(w.sum(), 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("weights must be positive and sum to 1")

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def d(self):
        return self.means.shape[1]

    def log_weights(self):
        return np.log(self.weights)

    def sample(self, n, rng):
        """n exact draws from the mixture."""
        idx = rng.choice(self.n_components, size=n, p=self.weights)
        return self.means[idx] + rng.standard_normal((n, self.d))


def _scale_var(prior, t, sched):
    # q(x_t) = sum_k w_k N(scale * mu_k, var * I)
    t = int(t)
    if sched.kind == "vp":
        return float(np.sqrt(sched.alpha_bar[t])), 1.0
    return 1.0, 1.0 + float(sched.sigma2[t])


def gmm_marginal_logpdf(prior, x, t, sched):
    """log q(x_t) of the noised mixture at rows of x."""
    scale, var = _scale_var(prior, t, sched)
    return gmm_logpdf(np.atleast_2d(x), prior.means, prior.log_weights(), scale, var)


def gmm_score_source(prior, sched):
    """Exact score callable score(x, t) for the noised mixture."""
    log_w = prior.log_weights()
    means = np.ascontiguousarray(prior.means)

    def score(x, t):
        scale, var = _scale_var(prior, t, sched)
        return gmm_score(x, means, log_w, scale, var)

    return score


@dataclass(frozen=True, eq=False)
class PosteriorMixture:
    """Row-wise mixture posterior p(x0 | x_t): shared isotropic variance.

    log_resp: (n, K) log responsibilities; comp_means: (n, K, d).
    """

    log_resp: np.ndarray
    comp_means: np.ndarray
    var: float

    def mean(self):
        r = np.exp(self.log_resp)
        return np.einsum("nk,nkd->nd", r, self.comp_means)

    def sample(self, rng):
        """One posterior draw per row."""
        n, K, d = self.comp_means.shape
        u = rng.random((n, 1))
        cdf = np.cumsum(np.exp(self.log_resp), axis=1)
        idx = np.minimum((u > cdf).sum(axis=1), K - 1)
        picked = self.comp_means[np.arange(n), idx]
        return picked + np.sqrt(self.var) * rng.standard_normal((n, d))


def gmm_posterior_x0(prior, x, t, sched):
    """Exact posterior p(x0 | x_t) for the noised mixture.

    vp: components N((1 - ab) mu_k + sqrt(ab) x, (1 - ab) I);
    ve: components N((s2 mu_k + x) / (s2 + 1), s2 / (s2 + 1) I);
    responsibilities are those of q(x_t).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = int(t)
    scale, var_t = _scale_var(prior, t, sched)
    diff = x[:, None, :] - scale * prior.means[None, :, :]
    sq = np.einsum("nkd,nkd->nk", diff, diff)
    logits = prior.log_weights()[None, :] - 0.5 * sq / var_t
    logits -= logits.max(axis=1, keepdims=True)
    log_resp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    if sched.kind == "vp":
        ab = float(sched.alpha_bar[t])
        comp = (1.0 - ab) * prior.means[None, :, :] + np.sqrt(ab) * x[:, None, :]
        var = 1.0 - ab
    else:
        s2 = float(sched.sigma2[t])
        comp = (s2 * prior.means[None, :, :] + x[:, None, :]) / (s2 + 1.0)
        var = s2 / (s2 + 1.0)
    return PosteriorMixture(log_resp=log_resp, comp_means=comp, var=var)


# --- reference problems -------------------------------------------------


@dataclass(frozen=True, eq=False)
class GmmProblem:
    """A mixture prior, a linear measurement of one prior draw, and y."""

    prior: GmmPrior
    meas: ms.MeasurementModel
    y: np.ndarray
    x_true: np.ndarray
    seed: int

    @property
    def d_x(self):
        return self.prior.d

    @property
    def d_y(self):
        return self.meas.d_y


def generate_problem(d_x, d_y, seed, scale=8.0, sigma_y=1.0):
    """Self-contained mixture inverse problem keyed by (d_x, d_y, seed).

    25 components: means take lattice values {-2,...,2} * scale in the
    first two coordinates and N(0,1) values elsewhere; Dirichlet(1)
    weights; A has N(0,1) entries; y = A x_true + sigma_y eps with
    x_true one prior draw.
    """
    if d_x < 2:
        raise ValueError("d_x must be >= 2")
    if not 1 <= d_y <= d_x:
        raise ValueError("need 1 <= d_y <= d_x")
    rng = substream(seed, DOMAIN_PROBLEM, 0)
    grid = np.arange(-2, 3, dtype=np.float64) * scale
    lattice = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(25, 2)
    means = np.concatenate([lattice, rng.standard_normal((25, d_x - 2))], axis=1)
    weights = rng.dirichlet(np.ones(25))
    prior = GmmPrior(weights=weights, means=means)
    A = rng.standard_normal((d_y, d_x))
    meas = ms.MeasurementModel(A=A, sigma_y=sigma_y)
    x_true = prior.sample(1, rng)[0]
    y = np.einsum("ij,j->i", A, x_true) + sigma_y * rng.standard_normal(d_y)
    return GmmProblem(prior=prior, meas=meas, y=y, x_true=x_true, seed=int(seed))


def whitened_prior(prior, w):
    """The same mixture expressed in whitened coordinates x' = V^T x."""
    means_w = np.einsum("kd,de->ke", prior.means, w.V)
    return GmmPrior(weights=prior.weights, means=means_w)


def gmm_exact_posterior(problem, w=None):
    """Closed-form posterior p(x0 | y) in whitened coordinates.

    Returns (log_weights (K,), comp_means (K, d_x), comp_var (d_x,)).
    Component k's evidence is N(y'; s mu'_k, sigma_y^2 + s_i^2 diag) and
    its posterior is Gaussian with the shared diagonal covariance
    C_i = sigma_y^2 / (sigma_y^2 + s_i^2) observed, 1 unobserved.
    """
    if w is None:
        w = ms.whiten(problem.meas, problem.y)
    pw = whitened_prior(problem.prior, w)
    s, sy = w.s, w.sigma_y
    if sy <= 0.0:
        raise ValueError("exact posterior sampling needs sigma_y > 0")
    d_x = pw.d
    ev_var = sy**2 + s**2
    resid = w.y_w[None, :] - s[None, :] * pw.means[:, : w.d_y]
    log_ev = -0.5 * np.sum(resid**2 / ev_var + np.log(2.0 * np.pi * ev_var), axis=1)
    logits = pw.log_weights() + log_ev
    logits -= logits.max()
    log_weights = logits - np.log(np.exp(logits).sum())

    comp_var = np.ones(d_x)
    comp_var[: w.d_y] = sy**2 / (sy**2 + s**2)
    comp_means = pw.means.copy()
    comp_means[:, : w.d_y] = comp_var[: w.d_y] * (
        pw.means[:, : w.d_y] + s * w.y_w / sy**2
    )
    return log_weights, comp_means, comp_var


def gmm_exact_posterior_sample(problem, n, seed, w=None):
    """n exact posterior draws in original coordinates."""
    if w is None:
        w = ms.whiten(problem.meas, problem.y)
    log_weights, comp_means, comp_var = gmm_exact_posterior(problem, w)
    rng = substream(seed, DOMAIN_PROBLEM, 1)
    idx = rng.choice(len(log_weights), size=n, p=np.exp(log_weights))
    x_w = comp_means[idx] + np.sqrt(comp_var) * rng.standard_normal((n, problem.d_x))
    return ms.unwhiten(w, x_w)


# --- serialization -------------------------------------------------------


def save_problem(problem, path):
    """Write a problem to structured text (JSON) for exact replay."""
    payload = {
        "schema_version": 1,
        "seed": problem.seed,
        "sigma_y": problem.meas.sigma_y,
        "weights": problem.prior.weights.tolist(),
        "means": problem.prior.means.tolist(),
        "A": problem.meas.A.tolist(),
        "y": problem.y.tolist(),
        "x_true": problem.x_true.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_problem(path):
    """Inverse of save_problem; float64 round-trips exactly."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("schema_version") != 1:
        raise ValueError("unsupported problem schema")
    prior = GmmPrior(
        weights=np.array(payload["weights"]), means=np.array(payload["means"])
    )
    meas = ms.MeasurementModel(A=np.array(payload["A"]), sigma_y=payload["sigma_y"])
    return GmmProblem(
        prior=prior,
        meas=meas,
        y=np.array(payload["y"]),
        x_true=np.array(payload["x_true"]),
        seed=int(payload["seed"]),
    )
