"""Forward-noising schedules for diffusion models.

Two conventions are supported, both indexed by integer times t = 0..T where
t = 0 is data and t = T is the noisiest level:

variance preserving ("vp")
    q(x_t | x_{t-1}) = N(sqrt(1 - beta_t) x_{t-1}, beta_t I)
    q(x_t | x_0)     = N(sqrt(alpha_bar_t) x_0, (1 - alpha_bar_t) I)
    with alpha_bar_t = prod_{s<=t} (1 - beta_s) and alpha_bar_0 = 1.

variance exploding ("ve")
    q(x_t | x_{t-1}) = N(x_{t-1}, beta_t I)
    q(x_t | x_0)     = N(x_0, sigma_t^2 I), sigma_t^2 = sum_{s<=t} beta_s.

A schedule also carries `times`, the decreasing subsequence of {T, ..., 0}
a sampler actually visits (all of them by default).
"""

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "NoiseSchedule",
    "build_vp_schedule",
    "build_power_schedule",
    "ddim_times",
    "with_times",
]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Noise levels for t = 0..T plus the visited-times subsequence.

    beta has length T+1 with beta[0] == 0. For "vp" kind alpha_bar holds
    the cumulative products (alpha_bar[0] == 1); for "ve" kind sigma2
    holds the cumulative sums (sigma2[0] == 0). The unused array is None.
    """

    kind: str
    beta: np.ndarray
    alpha_bar: np.ndarray | None
    sigma2: np.ndarray | None
    times: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        times = np.asarray(self.times, dtype=np.int64)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "times", times)
        if self.kind not in ("vp", "ve"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if beta.ndim != 1 or len(beta) < 2:
            raise ValueError("beta must be 1-D with entries for t=0..T, T>=1")
        if beta[0] != 0.0:
            raise ValueError("beta[0] must be 0 (t=0 adds no noise)")
        if np.any(beta < 0.0) or not np.all(np.isfinite(beta)):
            raise ValueError("beta entries must be finite and >= 0")
        if self.kind == "vp":
            if np.any(beta >= 1.0):
                raise ValueError("vp beta entries must be < 1")
            if self.alpha_bar is None:
                raise ValueError("vp schedule requires alpha_bar")
            ab = np.asarray(self.alpha_bar, dtype=np.float64)
            object.__setattr__(self, "alpha_bar", ab)
            if self.sigma2 is not None:
                raise ValueError("sigma2 is a ve-only field")
            if ab.shape != beta.shape:
                raise ValueError("alpha_bar must align with beta")
            expect = np.concatenate([[1.0], np.cumprod(1.0 - beta[1:])])
            if not np.allclose(ab, expect, rtol=1e-12, atol=0.0):
                raise ValueError("alpha_bar inconsistent with beta")
            # strictly decreasing wherever noise is actually added
            steps = np.diff(ab)
            if np.any(steps[beta[1:] > 0.0] >= 0.0) or np.any(steps > 0.0):
                raise ValueError("alpha_bar must be non-increasing, strictly where beta>0")
        else:
            if self.sigma2 is None:
                raise ValueError("ve schedule requires sigma2")
            s2 = np.asarray(self.sigma2, dtype=np.float64)
            object.__setattr__(self, "sigma2", s2)
            if self.alpha_bar is not None:
                raise ValueError("alpha_bar is a vp-only field")
            if s2.shape != beta.shape:
                raise ValueError("sigma2 must align with beta")
            if not np.allclose(s2, np.cumsum(beta), rtol=1e-12, atol=0.0):
                raise ValueError("sigma2 inconsistent with beta")
        _check_times(times, self.T)

    @classmethod
    def from_beta(cls, kind, beta):
        """Build from per-step noise increments beta_1..beta_T."""
        beta = np.concatenate([[0.0], np.asarray(beta, dtype=np.float64).ravel()])
        T = len(beta) - 1
        times = np.arange(T, -1, -1, dtype=np.int64)
        if kind == "vp":
            alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - beta[1:])])
            return cls("vp", beta, alpha_bar, None, times)
        if kind != "ve":
            raise ValueError(f"unknown schedule kind {kind!r}")
        return cls("ve", beta, None, np.cumsum(beta), times)

    @property
    def T(self):
        return len(self.beta) - 1

    def next_time_above(self, t):
        """Smallest element of `times` strictly greater than t."""
        idx = np.searchsorted(-self.times, -int(t), side="left") - 1
        if idx < 0 or self.times[idx] <= t:
            raise ValueError(f"no schedule time above t={t}")
        return int(self.times[idx])

    def times_below(self, t):
        """Elements of `times` strictly smaller than t, decreasing."""
        return self.times[self.times < int(t)]


def _check_times(times, T):
    if times.ndim != 1 or len(times) < 2:
        raise ValueError("times must contain at least two entries")
    if times[0] != T or times[-1] != 0:
        raise ValueError("times must start at T and end at 0")
    if np.any(np.diff(times) >= 0):
        raise ValueError("times must be strictly decreasing")


def build_vp_schedule(T, beta_lo=1e-4, beta_hi=0.02):
    """Variance-preserving schedule with beta_t linear in t.

    beta_1 = beta_lo rises linearly to beta_T = beta_hi, the usual
    orientation for image-model training grids.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    if not (0.0 < beta_lo < beta_hi < 1.0):
        raise ValueError("need 0 < beta_lo < beta_hi < 1")
    return NoiseSchedule.from_beta("vp", np.linspace(beta_lo, beta_hi, T))


def build_power_schedule(T, t_min=0.1, t_max=100.0, power=7.0):
    """Variance-exploding schedule with sigma_t on a power-interpolated grid.

    sigma at step i (i = 1..T) is
        (t_max^(1/p) + (T-i)/(T-1) * (t_min^(1/p) - t_max^(1/p)))^p
    so sigma_1 = t_min and sigma_T = t_max, with fine spacing near t_min.
    """
    if T < 2:
        raise ValueError("T must be >= 2")
    if not (0.0 < t_min < t_max):
        raise ValueError("need 0 < t_min < t_max")
    i = np.arange(1, T + 1, dtype=np.float64)
    root = t_max ** (1.0 / power) + (T - i) / (T - 1) * (
        t_min ** (1.0 / power) - t_max ** (1.0 / power)
    )
    sigma = root**power
    sigma2 = np.concatenate([[0.0], sigma**2])
    return NoiseSchedule.from_beta("ve", np.diff(sigma2))


def ddim_times(T, n_steps):
    """Evenly index-spaced decreasing times T = t_0 > ... > t_n = 0.

    Requests for more steps than T collapse to the full grid.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    n_steps = min(n_steps, T)
    grid = np.round(np.linspace(T, 0, n_steps + 1)).astype(np.int64)
    times = np.unique(grid)[::-1]
    return times


def with_times(sched, n_steps):
    """Copy of `sched` visiting an evenly spaced n_steps-subsequence."""
    return replace(sched, times=ddim_times(sched.T, n_steps))
