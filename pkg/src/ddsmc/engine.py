"""Generic sequential Monte Carlo loop over batched particle ensembles.

Arrays carry a leading runs axis: states are (R, N, ...) for R independent
runs of N particles each, so repeating an experiment many times is one
vectorized pass. Weights and resampling never mix rows.

Randomness is counter-based: every consumer owns a Philox generator keyed
by (master_seed, domain, step), so draws are independent of execution
order and thread count, and any step can be replayed in isolation.
Per-particle substreams are the rows of one vectorized draw from the
step's generator.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DOMAIN_INIT",
    "DOMAIN_PROPOSE",
    "DOMAIN_RESAMPLE",
    "DOMAIN_FINAL",
    "DOMAIN_PROBLEM",
    "DOMAIN_METRIC",
    "substream",
    "ParticleEnsemble",
    "normalize",
    "ess",
    "multinomial_resample",
    "run_smc",
    "TRACE_DTYPE",
]

DOMAIN_INIT = 0
DOMAIN_PROPOSE = 1
DOMAIN_RESAMPLE = 2
DOMAIN_FINAL = 3
DOMAIN_PROBLEM = 4
DOMAIN_METRIC = 5


def substream(seed, domain, step):
    """Independent generator keyed by (seed, domain, step)."""
    ss = np.random.SeedSequence((int(seed), int(domain), int(step)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(eq=False)
class ParticleEnsemble:
    """States (R, N, d) plus per-particle cached arrays in aux.

    Every aux value must have leading shape (R, N) so resampling can
    carry caches alongside states.
    """

    states: np.ndarray
    logw: np.ndarray
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.states.ndim < 3:
            raise ValueError("states must be (R, N, ...)")
        R, N = self.states.shape[:2]
        if self.logw.shape != (R, N):
            raise ValueError("logw must be (R, N)")
        for key, arr in self.aux.items():
            if arr.shape[:2] != (R, N):
                raise ValueError(f"aux[{key!r}] must have leading shape (R, N)")

    @property
    def n_runs(self):
        return self.states.shape[0]

    @property
    def n_particles(self):
        return self.states.shape[1]


def normalize(logw):
    """Self-normalized weights and the log-evidence increment.

    Accepts (..., N); returns (weights, logz) where
    logz = logsumexp(logw) - log N along the last axis. A row of all
    -inf (every particle struck zero density) raises: that run has
    diverged and silently renormalizing would hide it.
    """
    logw = np.asarray(logw, dtype=np.float64)
    n = logw.shape[-1]
    hi = np.max(logw, axis=-1, keepdims=True)
    if not np.all(np.isfinite(hi)):
        raise FloatingPointError("all particle weights vanished in a run")
    shifted = np.exp(logw - hi)
    tot = shifted.sum(axis=-1, keepdims=True)
    w = shifted / tot
    logz = (hi + np.log(tot)).squeeze(-1) - np.log(n)
    return w, logz


def ess(w):
    """Effective sample size 1 / sum w^2 along the last axis."""
    w = np.asarray(w, dtype=np.float64)
    return 1.0 / np.sum(w * w, axis=-1)


def _resample_indices(w, rng):
    R, N = w.shape
    if N == 1:
        return np.zeros((R, 1), dtype=np.int64)
    u = rng.random((R, N))
    idx = np.empty((R, N), dtype=np.int64)
    for r in range(R):
        cdf = np.cumsum(w[r])
        cdf[-1] = 1.0
        idx[r] = np.searchsorted(cdf, u[r], side="right")
    return np.minimum(idx, N - 1)


def multinomial_resample(ens, w, rng):
    """Multinomial resampling within each run; aux arrays follow states.

    Returns a new ensemble with uniform (zero) log weights.
    """
    idx = _resample_indices(w, rng)
    rows = np.arange(ens.n_runs)[:, None]
    return ParticleEnsemble(
        states=ens.states[rows, idx],
        logw=np.zeros_like(ens.logw),
        aux={k: a[rows, idx] for k, a in ens.aux.items()},
    )


TRACE_DTYPE = np.dtype(
    [("run", np.int32), ("step", np.int32), ("time", np.float64),
     ("ess", np.float64), ("logz_inc", np.float64)]
)


def run_smc(init, weigh, propose, times, seed):
    """Run weigh -> normalize -> resample -> propose down the time grid.

    Args
    ----
    init : callable(rng) -> ParticleEnsemble at times[0]
    weigh : callable(ens, j, t) -> (R, N) incremental log weights at
        times[j]; called once per grid point including the final one
    propose : callable(ens, j, t_hi, t_lo, rng) -> ParticleEnsemble moved
        from times[j] to times[j+1]; called after resampling
    times : decreasing time grid
    seed : master seed for all substreams

    Returns
    -------
    (ensemble, weights, trace): the final ensemble at times[-1], its
    normalized weights, and a structured diagnostics array with one row
    per (run, step).
    """
    times = np.asarray(times)
    ens = init(substream(seed, DOMAIN_INIT, 0))
    R = ens.n_runs
    rows = []
    w = None
    for j, t in enumerate(times):
        logw = weigh(ens, j, int(t))
        w, logz = normalize(logw)
        e = ess(w)
        rec = np.empty(R, dtype=TRACE_DTYPE)
        rec["run"] = np.arange(R)
        rec["step"] = j
        rec["time"] = float(t)
        rec["ess"] = e
        rec["logz_inc"] = logz
        rows.append(rec)
        if j < len(times) - 1:
            ens = multinomial_resample(ens, w, substream(seed, DOMAIN_RESAMPLE, j))
            ens = propose(ens, j, int(t), int(times[j + 1]), substream(seed, DOMAIN_PROPOSE, j))
    return ens, w, np.concatenate(rows)
