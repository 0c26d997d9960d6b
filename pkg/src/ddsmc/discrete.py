"""SMC posterior sampling for categorical sequences under uniform noising.

State: D variables with d categories each. The forward chain resamples
each variable independently: at step t a variable keeps its value with
probability 1 - beta_t and otherwise draws uniformly, so the t-step
cumulative kernel is again of the same one-parameter family with
1 - beta_bar_t = prod_{s<=t} (1 - beta_s).

The prior is a small enumerable table, so denoising is exact over joint
states: p(x0 | x_t) is a (d^D,)-vector per particle. Reverse moves are
decoupled -- draw a joint x0 from the (observation-conditioned) denoising
posterior, then renoise each variable through the cumulative kernel to the
lower time. Because a joint x0 is drawn and renoised, the reverse chain
preserves the forward marginals exactly; there is no factorization gap.
Incremental weights use the exact mixture densities of the decoupled
transition under the prior-only and conditioned posteriors, both
enumerable; the final step's weight cancels to unit identically.

The measurement is one uniform-noise observation y of x0 per variable.

Probabilities are stored and combined in linear space with
renormalization each step; the tiny category count keeps that stable.
"""

from dataclasses import dataclass

import numpy as np

from .engine import DOMAIN_FINAL, ParticleEnsemble, run_smc, substream

__all__ = [
    "CategoricalGrid",
    "UniformKernel",
    "cumulative_kernel",
    "ToyDiscretePrior",
    "potts_chain_prior",
    "save_prior_table",
    "load_prior_table",
    "geometric_betas",
    "joint_denoiser",
    "exact_denoiser",
    "discrete_posterior_x0",
    "decoupled_transition_logpdf",
    "sample_decoupled",
    "categorical_sample",
    "categorical_logpdf",
    "brute_force_posterior",
    "chain_prior",
    "D3smcResult",
    "run_d3smc",
]


@dataclass(frozen=True)
class CategoricalGrid:
    """D variables over d categories with flat-index conversions."""

    D: int
    d: int

    def __post_init__(self):
        if self.D < 1 or self.d < 2:
            raise ValueError("need D >= 1 variables and d >= 2 categories")

    @property
    def n_states(self):
        return self.d**self.D

    def all_states(self):
        """(d^D, D) array of every joint state, lexicographic order."""
        idx = np.arange(self.n_states)
        return self.decode(idx)

    def encode(self, states):
        """(..., D) index arrays -> flat indices, first variable slowest."""
        states = np.asarray(states)
        out = np.zeros(states.shape[:-1], dtype=np.int64)
        for j in range(self.D):
            out = out * self.d + states[..., j]
        return out

    def decode(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        out = np.empty(idx.shape + (self.D,), dtype=np.int64)
        for j in range(self.D - 1, -1, -1):
            out[..., j] = idx % self.d
            idx = idx // self.d
        return out


@dataclass(frozen=True)
class UniformKernel:
    """Keep with probability 1 - beta, otherwise resample uniformly."""

    d: int
    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    def as_matrix(self):
        """(d, d) row-stochastic matrix P(to | from)."""
        M = np.full((self.d, self.d), self.beta / self.d)
        M[np.arange(self.d), np.arange(self.d)] += 1.0 - self.beta
        return M

    def push(self, probs):
        """Distributions (..., d) through the kernel."""
        return (1.0 - self.beta) * probs + self.beta / self.d


def cumulative_kernel(betas, t, d):
    """Kernel of the forward chain run from 0 to t.

    betas: (T+1,) with betas[0] == 0. The composite of uniform kernels is
    uniform with 1 - beta_bar_t = prod_{s<=t} (1 - beta_s).
    """
    betas = np.asarray(betas, dtype=np.float64)
    if betas[0] != 0.0:
        raise ValueError("betas[0] must be 0")
    keep = float(np.prod(1.0 - betas[1 : t + 1]))
    return UniformKernel(d=d, beta=1.0 - keep)


def geometric_betas(T, final_keep=0.01):
    """Constant per-step betas with prod(1 - beta) == final_keep."""
    if not 0.0 < final_keep < 1.0:
        raise ValueError("final_keep must lie in (0, 1)")
    beta = 1.0 - final_keep ** (1.0 / T)
    return np.concatenate([[0.0], np.full(T, beta)])


@dataclass(frozen=True, eq=False)
class ToyDiscretePrior:
    """Enumerable joint distribution over a CategoricalGrid."""

    grid: CategoricalGrid
    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64).ravel()
        object.__setattr__(self, "table", table)
        if table.shape != (self.grid.n_states,):
            raise ValueError("table must have d^D entries")
        if np.any(table < 0.0) or not np.isclose(table.sum(), 1.0, atol=1e-9):
            raise ValueError("table must be a distribution")

    def sample(self, n, rng):
        idx = rng.choice(self.grid.n_states, size=n, p=self.table)
        return self.grid.decode(idx)

    def marginals(self):
        """(D, d) per-variable marginals."""
        states = self.grid.all_states()
        out = np.zeros((self.grid.D, self.grid.d))
        for j in range(self.grid.D):
            np.add.at(out[j], states[:, j], self.table)
        return out


def potts_chain_prior(D, d, coupling=1.5):
    """Correlated prior p(x) propto exp(coupling * sum_j [x_j == x_{j+1}])."""
    grid = CategoricalGrid(D=D, d=d)
    states = grid.all_states()
    agree = np.zeros(grid.n_states)
    for j in range(D - 1):
        agree += states[:, j] == states[:, j + 1]
    table = np.exp(coupling * agree)
    return ToyDiscretePrior(grid=grid, table=table / table.sum())


def save_prior_table(prior, path):
    """Write as a text table: header "D d", then "i_1 ... i_D prob" rows."""
    states = prior.grid.all_states()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{prior.grid.D} {prior.grid.d}\n")
        for row, p in zip(states, prior.table):
            cells = " ".join(str(int(v)) for v in row)
            fh.write(f"{cells} {float(p)!r}\n")


def load_prior_table(path):
    """Inverse of save_prior_table; unlisted states get probability 0."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().split()
        if len(first) != 2:
            raise ValueError("first line must be 'D d'")
        grid = CategoricalGrid(D=int(first[0]), d=int(first[1]))
        table = np.zeros(grid.n_states)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != grid.D + 1:
                raise ValueError(f"bad table row: {line!r}")
            state = np.array([int(v) for v in parts[:-1]])
            if np.any(state < 0) or np.any(state >= grid.d):
                raise ValueError(f"category out of range: {line!r}")
            table[grid.encode(state)] = float(parts[-1])
    total = table.sum()
    if total <= 0.0:
        raise ValueError("table has no mass")
    return ToyDiscretePrior(grid=grid, table=table / total)


# --- exact denoising and the decoupled proposal -----------------------------


def joint_denoiser(prior, x_t, kernel):
    """Joint posterior p(x0 | x_t) over all d^D states by enumeration.

    Args
    ----
    prior : ToyDiscretePrior
    x_t : (..., D) integer states
    kernel : cumulative UniformKernel from 0 to t

    Returns
    -------
    (..., d^D) posterior tables, rows normalized.
    """
    grid = prior.grid
    x_t = np.asarray(x_t, dtype=np.int64)
    lead = x_t.shape[:-1]
    flat = x_t.reshape(-1, grid.D)
    states = grid.all_states()
    M = kernel.as_matrix()
    w = np.broadcast_to(prior.table, (flat.shape[0], grid.n_states)).copy()
    for j in range(grid.D):
        w *= M[flat[:, j][:, None], states[:, j][None, :]]
    tot = w.sum(axis=1, keepdims=True)
    if np.any(tot <= 0.0):
        raise FloatingPointError("denoiser hit a zero-probability state")
    w /= tot
    return w.reshape(lead + (grid.n_states,))


def exact_denoiser(prior, x_t, kernel):
    """Per-variable marginals p(x0_j | x_t); (..., D, d) from the joint."""
    grid = prior.grid
    joint = joint_denoiser(prior, x_t, kernel)
    lead = joint.shape[:-1]
    flat = joint.reshape(-1, grid.n_states)
    states = grid.all_states()
    marg = np.empty((flat.shape[0], grid.D, grid.d))
    for j in range(grid.D):
        onehot = states[:, j][:, None] == np.arange(grid.d)[None, :]
        marg[:, j, :] = np.einsum("ns,sk->nk", flat, onehot.astype(np.float64))
    return marg.reshape(lead + (grid.D, grid.d))


def _channel_lik(grid, y, ykernel):
    """(d^D,) likelihood p(y | x0) for every joint state."""
    y = np.asarray(y, dtype=np.int64).ravel()
    states = grid.all_states()
    My = ykernel.as_matrix()
    lik = np.ones(grid.n_states)
    for j in range(grid.D):
        lik *= My[y[j], states[:, j]]
    return lik


def discrete_posterior_x0(joint, y, ykernel, grid):
    """Condition joint denoiser tables on the observation.

    Returns (posterior (..., d^D), loglik (...,)) with
    loglik = log p~(y | x_t) = log sum_x0 p(y | x0) p(x0 | x_t).
    """
    lik = _channel_lik(grid, y, ykernel)
    unnorm = joint * lik
    z = unnorm.sum(axis=-1)
    with np.errstate(divide="ignore"):
        loglik = np.log(z)
    safe = np.where(z > 0.0, z, 1.0)[..., None]
    post = np.where(z[..., None] > 0.0, unnorm / safe, 1.0 / joint.shape[-1])
    return post, loglik


def decoupled_transition_logpdf(weights, kernel_lo, x_lo, grid):
    """log of sum_x0 weights[x0] * prod_j kernel_lo(x_lo_j | x0_j).

    The exact density of "draw a joint x0 from `weights`, renoise each
    variable through kernel_lo" evaluated at states x_lo (..., D).
    """
    states = grid.all_states()
    M = kernel_lo.as_matrix()
    x_lo = np.asarray(x_lo, dtype=np.int64)
    lead = x_lo.shape[:-1]
    flat = x_lo.reshape(-1, grid.D)
    G = np.ones((flat.shape[0], grid.n_states))
    for j in range(grid.D):
        G *= M[flat[:, j][:, None], states[:, j][None, :]]
    dens = np.einsum("ns,ns->n", weights.reshape(-1, grid.n_states), G)
    with np.errstate(divide="ignore"):
        return np.log(dens).reshape(lead)


def sample_decoupled(weights, kernel_lo, grid, rng):
    """Draw joint x0 states from `weights` rows, renoise through kernel_lo."""
    x0_idx = categorical_sample(weights, rng)
    x0 = grid.decode(x0_idx)
    mask = rng.random(x0.shape) < kernel_lo.beta
    uni = rng.integers(0, grid.d, size=x0.shape)
    return np.where(mask, uni, x0)


def categorical_sample(probs, rng):
    """One draw per distribution; probs (..., d) -> indices (...)."""
    u = rng.random(probs.shape[:-1] + (1,))
    cdf = np.cumsum(probs, axis=-1)
    d = probs.shape[-1]
    idx = np.minimum((u > cdf).sum(axis=-1), d - 1)
    return idx


def categorical_logpdf(probs, idx):
    """Sum over variables of log probs[..., j, idx_j]; probs (..., D, d)."""
    picked = np.take_along_axis(probs, idx[..., None], axis=-1)[..., 0]
    with np.errstate(divide="ignore"):
        return np.log(picked).sum(axis=-1)


# --- references ------------------------------------------------------------


def brute_force_posterior(prior, y, ykernel):
    """Exact posterior table p(x0 | y) by enumeration."""
    grid = prior.grid
    w = prior.table * _channel_lik(grid, y, ykernel)
    tot = w.sum()
    if tot <= 0.0:
        raise ValueError("observation has zero probability under the prior")
    return w / tot


def chain_prior(prior, betas):
    """Exact x0 distribution induced by the decoupled reverse chain.

    Diagnostic: starts from the exact noisiest marginal and applies the
    reverse transitions (joint-x0 draw, then per-variable renoising) by
    full enumeration. Marginal preservation makes this reproduce
    prior.table up to floating-point error.
    """
    grid = prior.grid
    T = len(betas) - 1
    states = grid.all_states()
    S = grid.n_states

    qT = cumulative_kernel(betas, T, grid.d)
    MT = qT.as_matrix()
    fwd = np.ones((S, S))
    for j in range(grid.D):
        fwd *= MT[states[:, j][None, :], states[:, j][:, None]]
    p = np.einsum("s,st->t", prior.table, fwd)

    for t in range(T, 0, -1):
        post = joint_denoiser(prior, states, cumulative_kernel(betas, t, grid.d))
        M_lo = cumulative_kernel(betas, t - 1, grid.d).as_matrix()
        noise = np.ones((S, S))
        for j in range(grid.D):
            noise *= M_lo[states[:, j][None, :], states[:, j][:, None]]
        rev = np.einsum("hs,st->ht", post, noise)
        p = np.einsum("h,ht->t", p, rev)
    return p


# --- the sampler ------------------------------------------------------------


@dataclass(eq=False)
class D3smcResult:
    """Final ensemble of x0 states plus diagnostics, mirroring DdsmcResult."""

    states: np.ndarray
    weights: np.ndarray
    draws: np.ndarray
    trace: np.ndarray
    seed: int

    def resampled_outputs(self, n_per_run=None):
        """Unweighted (R * n_per_run, D) output states."""
        R, N, D = self.states.shape
        if n_per_run is None:
            n_per_run = N
        rng = substream(self.seed, DOMAIN_FINAL, 1)
        u = rng.random((R, n_per_run))
        cdf = np.cumsum(self.weights, axis=1)
        cdf[:, -1] = 1.0
        out = np.empty((R, n_per_run, D), dtype=np.int64)
        for r in range(R):
            idx = np.minimum(np.searchsorted(cdf[r], u[r], side="right"), N - 1)
            out[r] = self.states[r, idx]
        return out.reshape(R * n_per_run, D)


def run_d3smc(prior, betas, y, ykernel, n_particles, seed, runs=1):
    """SMC over the discrete chain with exact joint denoising.

    Args
    ----
    prior : ToyDiscretePrior
    betas : (T+1,) forward noise schedule, betas[0] == 0
    y : (D,) observed categories
    ykernel : UniformKernel of the measurement channel
    n_particles, seed, runs : ensemble shape and reproducibility

    Returns
    -------
    D3smcResult with states (R, N, D).
    """
    betas = np.asarray(betas, dtype=np.float64)
    grid = prior.grid
    T = len(betas) - 1
    if T < 1:
        raise ValueError("need at least one noising step")
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.shape != (grid.D,) or np.any(y < 0) or np.any(y >= grid.d):
        raise ValueError("y must hold D categories")
    R, N = int(runs), int(n_particles)
    times = np.arange(T, -1, -1)
    kernels = [cumulative_kernel(betas, t, grid.d) for t in range(T + 1)]

    def init(rng):
        x0 = prior.sample(R * N, rng).reshape(R, N, grid.D)
        mask = rng.random((R, N, grid.D)) < kernels[T].beta
        uni = rng.integers(0, grid.d, size=(R, N, grid.D))
        states = np.where(mask, uni, x0)
        zeros = np.zeros((R, N))
        aux = {
            "post": np.zeros((R, N, grid.n_states)),
            "joint": np.zeros((R, N, grid.n_states)),
            "loglik": zeros.copy(),
            "log_prior_tr": zeros.copy(),
            "log_prop": zeros.copy(),
        }
        return ParticleEnsemble(states=states, logw=zeros.copy(), aux=aux)

    def weigh(ens, j, t):
        joint = joint_denoiser(prior, ens.states, kernels[t])
        post, ll = discrete_posterior_x0(joint, y, ykernel, grid)
        if j == 0:
            logw = ll
        else:
            logw = ll + ens.aux["log_prior_tr"] - ens.aux["loglik"] - ens.aux["log_prop"]
        ens.aux["post"] = post
        ens.aux["joint"] = joint
        ens.aux["loglik"] = ll
        return logw

    def propose(ens, j, t_hi, t_lo, rng):
        k_lo = kernels[t_lo]
        x_new = sample_decoupled(ens.aux["post"], k_lo, grid, rng)
        aux = dict(ens.aux)
        aux["log_prop"] = decoupled_transition_logpdf(ens.aux["post"], k_lo, x_new, grid)
        aux["log_prior_tr"] = decoupled_transition_logpdf(
            ens.aux["joint"], k_lo, x_new, grid
        )
        return ParticleEnsemble(states=x_new, logw=ens.logw, aux=aux)

    ens, w, trace = run_smc(init, weigh, propose, times, seed)

    rng = substream(seed, DOMAIN_FINAL, 0)
    u = rng.random((R, 1))
    cdf = np.cumsum(w, axis=1)
    cdf[:, -1] = 1.0
    idx = np.minimum((u > cdf).sum(axis=1), N - 1)
    draws = ens.states[np.arange(R), idx]
    return D3smcResult(
        states=ens.states, weights=w, draws=draws, trace=trace, seed=int(seed)
    )
