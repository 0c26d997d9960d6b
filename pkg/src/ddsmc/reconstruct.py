"""Denoising reconstructions x_t -> x0hat and the decoupled transition kernel.

A score source is any callable score(x, t) -> (n, d) evaluating the prior
score grad log q(x_t) at integer time t for a batch of states. Two
reconstructions are supported:

Tweedie
    the posterior mean E[x0 | x_t] expressed through the score,
        ve: x0hat = x + sigma_t^2 score(x, t)
        vp: x0hat = (x + (1 - alpha_bar_t) score(x, t)) / sqrt(alpha_bar_t)

OdeSolve
    deterministic integration of the probability-flow ODE from t to 0
    along the schedule's visited times,
        vp: x <- sqrt(ab_lo/ab_hi) x
               + ((1-ab_hi) sqrt(ab_lo/ab_hi) - sqrt((1-ab_lo)(1-ab_hi)))
                 * score(x, hi)
        ve: x <- x + sigma_hi (sigma_hi - sigma_lo) score(x, hi)

The transition kernel p^eta(x_t | x_{t+1}, x0hat) interpolates between
fresh re-noising of the reconstruction (eta = 0) and the standard
ancestral posterior (eta = 1); it is Gaussian with isotropic variance.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Tweedie",
    "OdeSolve",
    "tweedie_reconstruct",
    "ode_reconstruct",
    "reconstruct",
    "prior_transition",
    "effective_beta",
]


@dataclass(frozen=True)
class Tweedie:
    pass


@dataclass(frozen=True)
class OdeSolve:
    """Probability-flow reconstruction using at most max_steps substeps.

    max_steps=None integrates over every remaining visited time.
    """

    max_steps: int | None = 5


def tweedie_reconstruct(score_fn, x, t, sched):
    """Posterior-mean reconstruction E[x0 | x_t] via the score."""
    t = int(t)
    if t == 0:
        return np.asarray(x, dtype=np.float64).copy()
    if sched.kind == "vp":
        ab = sched.alpha_bar[t]
        return (x + (1.0 - ab) * score_fn(x, t)) / np.sqrt(ab)
    s2 = sched.sigma2[t]
    return x + s2 * score_fn(x, t)


def _ode_path(sched, t, max_steps):
    path = sched.times_below(t)
    if max_steps is not None and max_steps < len(path):
        # subsample by index from the end so the final time 0 is always kept
        idx = np.unique(np.round(np.linspace(len(path) - 1, 0, max_steps)).astype(int))
        path = path[idx]
    return path


def ode_reconstruct(score_fn, x, t, sched, max_steps=None):
    """Integrate the probability-flow ODE from time t down to 0.

    Steps through the visited times of `sched` strictly below t; when
    max_steps trims the path, times are subsampled evenly by index with
    the final time 0 always kept.
    """
    t = int(t)
    x = np.asarray(x, dtype=np.float64).copy()
    if t == 0:
        return x
    path = _ode_path(sched, t, max_steps)
    if len(path) == 0 or path[-1] != 0:
        raise ValueError("schedule times below t must end at 0")
    cur = t
    if sched.kind == "vp":
        ab = sched.alpha_bar
        for nxt in path:
            ratio = np.sqrt(ab[nxt] / ab[cur])
            coef = (1.0 - ab[cur]) * ratio - np.sqrt((1.0 - ab[nxt]) * (1.0 - ab[cur]))
            x = ratio * x + coef * score_fn(x, cur)
            cur = int(nxt)
    else:
        sig = np.sqrt(sched.sigma2)
        for nxt in path:
            x = x + sig[cur] * (sig[cur] - sig[nxt]) * score_fn(x, cur)
            cur = int(nxt)
    return x


def reconstruct(recon, score_fn, x, t, sched):
    """Dispatch on the reconstruction config (Tweedie | OdeSolve)."""
    if isinstance(recon, Tweedie):
        return tweedie_reconstruct(score_fn, x, t, sched)
    if isinstance(recon, OdeSolve):
        return ode_reconstruct(score_fn, x, t, sched, recon.max_steps)
    raise TypeError(f"unknown reconstruction {recon!r}")


def effective_beta(sched, t_lo, t_hi):
    """Noise increment of the forward chain jumped from t_lo to t_hi.

    ve: sigma_hi^2 - sigma_lo^2;  vp: 1 - alpha_bar_hi / alpha_bar_lo.
    """
    if not 0 <= t_lo < t_hi <= sched.T:
        raise ValueError("need 0 <= t_lo < t_hi <= T")
    if sched.kind == "vp":
        return 1.0 - sched.alpha_bar[t_hi] / sched.alpha_bar[t_lo]
    return sched.sigma2[t_hi] - sched.sigma2[t_lo]


def prior_transition(x_next, x0hat, t, eta, sched):
    """Gaussian transition p^eta(x_t | x_{t+1}, x0hat) of the decoupled chain.

    t is the lower time; the upper time is the next visited time above t.
    eta = 0 re-noises the reconstruction to level t, ignoring x_{t+1};
    eta = 1 is the ancestral posterior q(x_t | x_{t+1}, x0 = x0hat).

    Args
    ----
    x_next : (n, d) states at the upper time
    x0hat : (n, d) reconstructions from x_next
    t : lower time (>= 0)
    eta : inverse temperature in [0, 1]
    sched : NoiseSchedule

    Returns
    -------
    (mean, var): (n, d) means and a scalar isotropic variance.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    t = int(t)
    t_hi = sched.next_time_above(t)
    b = effective_beta(sched, t, t_hi)
    if sched.kind == "vp":
        ab_lo = sched.alpha_bar[t]
        ab_hi = sched.alpha_bar[t_hi]
        den = eta * (1.0 - b) - eta * ab_hi + b
        mean = (np.sqrt(ab_lo) * b * x0hat + eta * np.sqrt(1.0 - b) * (1.0 - ab_lo) * x_next) / den
        var = b * (1.0 - ab_lo) / den
    else:
        s2_lo = sched.sigma2[t]
        den = eta * s2_lo + b
        mean = (b * x0hat + eta * s2_lo * x_next) / den
        var = b * s2_lo / den
    return mean, float(var)
