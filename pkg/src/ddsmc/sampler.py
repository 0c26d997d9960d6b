"""Sequential Monte Carlo posterior sampler with decoupled diffusion moves.

Targets p(x0 | y) for y = A x0 + sigma_y eps under a diffusion prior. The
intermediate target at time t weights the prior marginal by the
reconstruction likelihood p~(y | x_t) = N(y; A x0hat(x_t), sigma_y^2 I +
rho_t^2 A A^T); transitions use the decoupled kernel p^eta(x_t | x_{t+1},
x0hat) and the proposal replaces x0hat with the mean of the x0-posterior
given y, shifting particles toward the measurement before re-noising.

All particle math runs in whitened measurement coordinates; results are
rotated back at the end. The score source must therefore evaluate the
prior score in whitened coordinates.

Incremental weights, time t reached from t+1 on the visited grid:

    t = T     : log w = ll_T(x_T)
    0 < t < T : log w = ll_t(x_t) + log p^eta(x_t | x_{t+1})
                        - ll_{t+1}(x_{t+1}) - log r(x_t | x_{t+1}, y)
    t = 0     : log w = log p(y | x_0) - ll_1(x_1)   (x_0 proposed as the
                x0-posterior mean given x_1: a fully adapted final step)

with ll_t the reconstruction log likelihood at time t's rho.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import measurement as ms
from .engine import DOMAIN_FINAL, ParticleEnsemble, run_smc, substream
from .reconstruct import OdeSolve, Tweedie, effective_beta, reconstruct

__all__ = [
    "GmmDefault",
    "PowerInterp",
    "rho_schedule",
    "DdsmcConfig",
    "TargetEvaluation",
    "proposal_coefficients",
    "lambda_sq",
    "proposal",
    "proposal_t0",
    "log_weight",
    "DdsmcResult",
    "run_ddsmc",
]

logger = logging.getLogger(__name__)


# --- reconstruction-uncertainty schedule ---------------------------------


@dataclass(frozen=True)
class GmmDefault:
    """rho_t^2 = (1 - alpha_bar_t) / sqrt(2); vp schedules only."""


@dataclass(frozen=True)
class PowerInterp:
    """Power-interpolated rho over the visited times, rho_max down to rho_min."""

    rho_min: float = 0.03
    rho_max: float = 50.0
    power: float = 7.0


def rho_schedule(sched, spec):
    """Per-visited-time reconstruction noise levels, rho at t=0 fixed to 0.

    Returns an array aligned with sched.times.
    """
    times = sched.times
    m = len(times)
    rho = np.zeros(m)
    if isinstance(spec, GmmDefault):
        if sched.kind != "vp":
            raise ValueError("GmmDefault rho needs a vp schedule")
        ab = sched.alpha_bar[times[:-1]]
        rho[:-1] = np.sqrt((1.0 - ab) / np.sqrt(2.0))
    elif isinstance(spec, PowerInterp):
        if not 0.0 < spec.rho_min <= spec.rho_max:
            raise ValueError("need 0 < rho_min <= rho_max")
        p = spec.power
        if m == 2:
            rho[0] = spec.rho_max
        else:
            frac = np.arange(m - 1) / (m - 2)
            root = spec.rho_max ** (1.0 / p) + frac * (
                spec.rho_min ** (1.0 / p) - spec.rho_max ** (1.0 / p)
            )
            rho[:-1] = root**p
    else:
        raise TypeError(f"unknown rho spec {spec!r}")
    return rho


# --- proposal algebra -----------------------------------------------------


def proposal_coefficients(sched, t_lo, t_hi, eta):
    """Coefficients (c_f, c_x, prior_var) of the decoupled kernel.

    The kernel mean is c_f * x0hat + c_x * x_next with isotropic variance
    prior_var; the proposal reuses c_f and c_x with the x0-posterior mean
    in place of x0hat.
    """
    b = effective_beta(sched, t_lo, t_hi)
    if sched.kind == "vp":
        ab_lo = sched.alpha_bar[t_lo]
        ab_hi = sched.alpha_bar[t_hi]
        den = eta * (1.0 - b) - eta * ab_hi + b
        c_f = np.sqrt(ab_lo) * b / den
        c_x = eta * np.sqrt(1.0 - b) * (1.0 - ab_lo) / den
        prior_var = b * (1.0 - ab_lo) / den
    else:
        s2_lo = sched.sigma2[t_lo]
        den = eta * s2_lo + b
        c_f = b / den
        c_x = eta * s2_lo / den
        prior_var = b * s2_lo / den
    return float(c_f), float(c_x), float(prior_var)


def lambda_sq(sched, t_lo, t_hi, eta, rho_hi, lambda_mode="matched"):
    """Base proposal variance lambda^2 and whether it was clamped at 0.

    "matched": prior_var - (c_f rho_hi)^2, so that an uninformative
    measurement makes the proposal coincide with the kernel exactly (the
    x0-posterior variance is then rho_hi^2 per coordinate). Negative
    values clamp to 0: there the proposal is over-dispersed and the
    importance weights absorb the difference.

    "daps": the marginal noising variance at t_lo (1 - alpha_bar_lo for
    vp, sigma_lo^2 for ve): the variance used when re-noising a fresh x0
    draw to level t_lo.
    """
    c_f, _, prior_var = proposal_coefficients(sched, t_lo, t_hi, eta)
    if lambda_mode == "daps":
        if sched.kind == "vp":
            return float(1.0 - sched.alpha_bar[t_lo]), False
        return float(sched.sigma2[t_lo]), False
    if lambda_mode != "matched":
        raise ValueError(f"unknown lambda_mode {lambda_mode!r}")
    lam2 = prior_var - (c_f * rho_hi) ** 2
    if lam2 < 0.0:
        return 0.0, True
    return float(lam2), False


def proposal(sched, x_next, x0hat, t_lo, t_hi, eta, rho_hi, wmeas, lambda_mode="matched"):
    """Measurement-aware proposal r(x_t | x_{t+1}, y) as a DiagGaussian.

    Args
    ----
    sched : NoiseSchedule
    x_next, x0hat : (n, d) whitened parent states and reconstructions
    t_lo, t_hi : lower/upper times of the move
    eta : inverse temperature in [0, 1]
    rho_hi : reconstruction noise level at t_hi
    wmeas : WhitenedMeasurement
    lambda_mode : "matched" or "daps"

    Returns
    -------
    (DiagGaussian, clamped): the proposal and whether lambda^2 clamped.
    """
    post = ms.posterior_x0(wmeas, x0hat, rho_hi)
    c_f, c_x, _ = proposal_coefficients(sched, t_lo, t_hi, eta)
    lam2, clamped = lambda_sq(sched, t_lo, t_hi, eta, rho_hi, lambda_mode)
    mean = c_f * post.mean + c_x * x_next
    var = lam2 + c_f**2 * post.var
    return ms.DiagGaussian(mean=mean, var=var), clamped


def proposal_t0(x_1, x0hat, rho_1, wmeas):
    """Final deterministic move: the x0-posterior mean given x_1 and y."""
    return ms.posterior_x0(wmeas, x0hat, rho_1).mean


def log_weight(step_kind, ll_t, ll_prev=None, log_prior=None, log_prop=None):
    """Assemble the incremental log weight for one of the three step kinds."""
    if step_kind == "first":
        return ll_t
    if step_kind == "middle":
        return ll_t + log_prior - ll_prev - log_prop
    if step_kind == "final":
        return ll_t - ll_prev
    raise ValueError(f"unknown step kind {step_kind!r}")


# --- the sampler ----------------------------------------------------------


@dataclass(frozen=True)
class DdsmcConfig:
    """Everything the sampler needs besides the problem itself."""

    sched: object
    recon: object = field(default_factory=Tweedie)
    eta: float = 1.0
    rho: object = field(default_factory=GmmDefault)
    n_particles: int = 256
    lambda_mode: str = "matched"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.lambda_mode not in ("matched", "daps"):
            raise ValueError("lambda_mode must be 'matched' or 'daps'")
        if not isinstance(self.recon, (Tweedie, OdeSolve)):
            raise TypeError("recon must be Tweedie or OdeSolve")


@dataclass(eq=False)
class TargetEvaluation:
    """Per-particle caches carried between steps, all shaped (R, N, ...)."""

    x0hat: np.ndarray
    loglik: np.ndarray
    log_prior_tr: np.ndarray
    log_prop: np.ndarray

    def as_aux(self):
        return {
            "x0hat": self.x0hat,
            "loglik": self.loglik,
            "log_prior_tr": self.log_prior_tr,
            "log_prop": self.log_prop,
        }

    @classmethod
    def from_aux(cls, aux):
        return cls(
            x0hat=aux["x0hat"],
            loglik=aux["loglik"],
            log_prior_tr=aux["log_prior_tr"],
            log_prop=aux["log_prop"],
        )


@dataclass(eq=False)
class DdsmcResult:
    """Final ensemble in original coordinates plus diagnostics.

    states: (R, N, d_x); weights: (R, N); draws: (R, d_x) one posterior
    draw per run; trace: structured (run, step, time, ess, logz_inc)
    rows; n_clamped: transitions whose lambda^2 clamped at 0.
    """

    states: np.ndarray
    weights: np.ndarray
    draws: np.ndarray
    trace: np.ndarray
    n_clamped: int
    seed: int

    @property
    def ess_min(self):
        return float(self.trace["ess"].min())

    def resampled_outputs(self, n_per_run=None):
        """Unweighted output samples: multinomial draws from each run.

        Uses the run's final-domain stream (step 1; the single per-run
        draw uses step 0), so outputs are reproducible from the result's
        seed alone. Returns (R * n_per_run, d_x).
        """
        R, N, d = self.states.shape
        if n_per_run is None:
            n_per_run = N
        rng = substream(self.seed, DOMAIN_FINAL, 1)
        u = rng.random((R, n_per_run))
        cdf = np.cumsum(self.weights, axis=1)
        cdf[:, -1] = 1.0
        out = np.empty((R, n_per_run, d))
        for r in range(R):
            idx = np.minimum(np.searchsorted(cdf[r], u[r], side="right"), N - 1)
            out[r] = self.states[r, idx]
        return out.reshape(R * n_per_run, d)


def run_ddsmc(score_fn, wmeas, cfg, seed, runs=1):
    """Run the sampler: R independent runs of N particles, one pass.

    Args
    ----
    score_fn : callable(x, t) -> (n, d) prior score in whitened
        coordinates at integer time t
    wmeas : WhitenedMeasurement (carries y and sigma_y)
    cfg : DdsmcConfig
    seed : master seed; all randomness is keyed by it
    runs : number of independent runs R

    Returns
    -------
    DdsmcResult
    """
    sched = cfg.sched
    times = sched.times
    m = len(times)
    if m < 2:
        raise ValueError("schedule must visit at least T and 0")
    if wmeas.sigma_y <= 0.0:
        raise ValueError("run_ddsmc needs sigma_y > 0 (the final weight is exact)")
    rho = rho_schedule(sched, cfg.rho)
    R, N, d = int(runs), cfg.n_particles, wmeas.d_x
    clamp_steps = set()

    def flat(a):
        return a.reshape(R * N, -1)

    def unflat(a):
        return a.reshape(R, N, -1)

    def recon_at(states, t):
        return unflat(reconstruct(cfg.recon, score_fn, flat(states), t, sched))

    def ll_at(x0hat, rho_t):
        return ms.approx_loglik(wmeas, flat(x0hat), rho_t).reshape(R, N)

    def init(rng):
        if sched.kind == "vp":
            states = rng.standard_normal((R, N, d))
        else:
            states = np.sqrt(sched.sigma2[times[0]]) * rng.standard_normal((R, N, d))
        zeros = np.zeros((R, N))
        aux = TargetEvaluation(
            x0hat=np.zeros((R, N, d)),
            loglik=zeros.copy(),
            log_prior_tr=zeros.copy(),
            log_prop=zeros.copy(),
        ).as_aux()
        return ParticleEnsemble(states=states, logw=zeros.copy(), aux=aux)

    def weigh(ens, j, t):
        if t > 0:
            x0hat = recon_at(ens.states, t)
            ll = ll_at(x0hat, rho[j])
            if j == 0:
                logw = log_weight("first", ll)
            else:
                logw = log_weight(
                    "middle",
                    ll,
                    ll_prev=ens.aux["loglik"],
                    log_prior=ens.aux["log_prior_tr"],
                    log_prop=ens.aux["log_prop"],
                )
            ens.aux["x0hat"] = x0hat
            ens.aux["loglik"] = ll
            return logw
        ll0 = ms.exact_loglik_whitened(wmeas, flat(ens.states)).reshape(R, N)
        return log_weight("final", ll0, ll_prev=ens.aux["loglik"])

    def propose(ens, j, t_hi, t_lo, rng):
        x0hat = flat(ens.aux["x0hat"])
        x = flat(ens.states)
        if t_lo == 0:
            new_states = unflat(proposal_t0(x, x0hat, rho[j], wmeas))
            aux = dict(ens.aux)
            return ParticleEnsemble(states=new_states, logw=ens.logw, aux=aux)
        prop, clamped = proposal(
            sched, x, x0hat, t_lo, t_hi, cfg.eta, rho[j], wmeas, cfg.lambda_mode
        )
        if clamped:
            clamp_steps.add(j)
        eps = rng.standard_normal((R * N, d))
        x_new = prop.mean + np.sqrt(prop.var) * eps
        c_f, c_x, prior_var = proposal_coefficients(sched, t_lo, t_hi, cfg.eta)
        prior = ms.DiagGaussian(
            mean=c_f * x0hat + c_x * x, var=np.full(d, prior_var)
        )
        aux = dict(ens.aux)
        aux["log_prior_tr"] = prior.logpdf(x_new).reshape(R, N)
        aux["log_prop"] = prop.logpdf(x_new).reshape(R, N)
        return ParticleEnsemble(states=unflat(x_new), logw=ens.logw, aux=aux)

    ens, w, trace = run_smc(init, weigh, propose, times, seed)

    if clamp_steps:
        logger.warning(
            "lambda^2 clamped to 0 at %d of %d transitions (proposal "
            "over-dispersed there; weights corrected)",
            len(clamp_steps),
            m - 1,
        )

    # one posterior draw per run, then rotate everything back
    rng = substream(seed, DOMAIN_FINAL, 0)
    u = rng.random((R, 1))
    cdf = np.cumsum(w, axis=1)
    cdf[:, -1] = 1.0
    idx = np.minimum((u > cdf).sum(axis=1), N - 1)
    draws_w = ens.states[np.arange(R), idx]
    states = ms.unwhiten(wmeas, ens.states)
    draws = ms.unwhiten(wmeas, draws_w)
    return DdsmcResult(
        states=states,
        weights=w,
        draws=draws,
        trace=trace,
        n_clamped=len(clamp_steps),
        seed=int(seed),
    )
