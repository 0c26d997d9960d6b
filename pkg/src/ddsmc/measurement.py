"""Linear-Gaussian measurements y = A x + sigma_y * eps and their whitening.

Everything downstream of `whiten` works in the rotated coordinates
x' = V^T x, y' = U^T y where A = U S V^T (thin SVD completed to a square
orthogonal V). There A acts diagonally: y'_i = s_i x'_i + noise for
i < d_y, and coordinates i >= d_y are unobserved. Posterior and likelihood
computations then factorize per coordinate.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import diag_logpdf

__all__ = [
    "MeasurementModel",
    "WhitenedMeasurement",
    "DiagGaussian",
    "whiten",
    "unwhiten",
    "exact_loglik",
    "approx_loglik",
    "posterior_x0",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _mm(a, b):
    # deterministic matrix product: fixed-order C loops, no BLAS dispatch
    return np.einsum("ij,jk->ik", a, b, optimize=False)


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    """Observation operator A (d_y, d_x) with noise level sigma_y >= 0."""

    A: np.ndarray
    sigma_y: float
    diag_flag: bool = False

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "sigma_y", float(self.sigma_y))
        if A.ndim != 2:
            raise ValueError("A must be a matrix")
        if A.shape[0] > A.shape[1]:
            raise ValueError("need d_y <= d_x")
        if self.sigma_y < 0.0:
            raise ValueError("sigma_y must be >= 0")
        d_y = A.shape[0]
        off = A.copy()
        off[np.arange(d_y), np.arange(d_y)] = 0.0
        object.__setattr__(self, "diag_flag", not np.any(off))

    @property
    def d_y(self):
        return self.A.shape[0]

    @property
    def d_x(self):
        return self.A.shape[1]


@dataclass(frozen=True, eq=False)
class WhitenedMeasurement:
    """Rotated measurement: y' = U^T y, A = U diag(s) V^T, V square."""

    U: np.ndarray
    s: np.ndarray
    V: np.ndarray
    y_w: np.ndarray
    sigma_y: float

    @property
    def d_y(self):
        return len(self.s)

    @property
    def d_x(self):
        return self.V.shape[0]


@dataclass(frozen=True, eq=False)
class DiagGaussian:
    """Gaussian with row-wise means (n, d) and a shared diagonal (d,).

    Coordinates with var == 0 are Dirac: sampling returns the mean there
    and logpdf is 0/-inf by exact match.
    """

    mean: np.ndarray
    var: np.ndarray

    def logpdf(self, x):
        return diag_logpdf(x, self.mean, self.var)

    def sample(self, rng):
        eps = rng.standard_normal(self.mean.shape)
        return self.mean + np.sqrt(self.var) * eps


def _complete_basis(V_thin):
    """Extend orthonormal columns to a full orthogonal matrix.

    Modified Gram-Schmidt against canonical basis vectors; deterministic
    and free of threaded LAPACK paths.
    """
    d_x, r = V_thin.shape
    cols = [V_thin[:, j].copy() for j in range(r)]
    for i in range(d_x):
        if len(cols) == d_x:
            break
        v = np.zeros(d_x)
        v[i] = 1.0
        for _ in range(2):
            for c in cols:
                v -= np.dot(c, v) * c
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            cols.append(v / nrm)
    if len(cols) != d_x:
        raise ValueError("failed to complete orthogonal basis")
    return np.stack(cols, axis=1)


def whiten(m, y):
    """Rotate a measurement model and observation into diagonal form.

    Args
    ----
    m : MeasurementModel
    y : (d_y,) observation

    Returns
    -------
    WhitenedMeasurement with strictly positive singular values. Rank
    deficiency (any singular value ~ 0) is rejected: unobserved
    directions must be genuinely absent from A, not numerically null.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    A = m.A
    d_y, d_x = A.shape
    if y.shape != (d_y,):
        raise ValueError("y has wrong length")

    if m.diag_flag:
        a = np.diag(A).copy()
        sign = np.where(a < 0.0, -1.0, 1.0)
        s = np.abs(a)
        U = np.diag(sign)
        V = np.eye(d_x)
    else:
        B = _mm(A, A.T)
        evals, evecs = np.linalg.eigh(B)
        order = np.argsort(evals)[::-1]
        evals = evals[order]
        U = evecs[:, order]
        s = np.sqrt(np.clip(evals, 0.0, None))
        # sign convention: first non-negligible entry of each u positive
        for j in range(d_y):
            col = U[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            if len(nz) and col[nz[0]] < 0.0:
                U[:, j] = -col
        V_thin = np.zeros((d_x, d_y))
        safe = np.where(s > 0.0, s, 1.0)
        for j in range(d_y):
            V_thin[:, j] = np.einsum("ij,i->j", A, U[:, j]) / safe[j]
        V = _complete_basis(V_thin)

    if np.any(s <= 1e-10 * max(float(s.max(initial=0.0)), 1.0)):
        raise ValueError("A is rank deficient; drop the null measurement rows")

    y_w = np.einsum("ij,i->j", U, y)
    return WhitenedMeasurement(U=U, s=s, V=V, y_w=y_w, sigma_y=m.sigma_y)


def unwhiten(w, x_w):
    """Map whitened states (..., d_x) back to original coordinates."""
    x_w = np.asarray(x_w, dtype=np.float64)
    return np.einsum("ij,...j->...i", w.V, x_w, optimize=False)


def to_whitened(w, x):
    """Map original-basis states (..., d_x) into whitened coordinates."""
    x = np.asarray(x, dtype=np.float64)
    return np.einsum("ji,...j->...i", w.V, x, optimize=False)


def exact_loglik(y, x0, m):
    """log N(y; A x0, sigma_y^2 I) for rows of x0 (original basis)."""
    if m.sigma_y <= 0.0:
        raise ValueError("exact_loglik needs sigma_y > 0")
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    pred = np.einsum("ij,nj->ni", m.A, x0, optimize=False)
    var = np.full(m.d_y, m.sigma_y**2)
    return diag_logpdf(np.broadcast_to(y, pred.shape), pred, var)


def exact_loglik_whitened(w, x0_w):
    """log N(y'; s x0', sigma_y^2 I), the whitened form of exact_loglik."""
    if w.sigma_y <= 0.0:
        raise ValueError("exact_loglik needs sigma_y > 0")
    x0_w = np.atleast_2d(np.asarray(x0_w, dtype=np.float64))
    pred = x0_w[:, : w.d_y] * w.s
    var = np.full(w.d_y, w.sigma_y**2)
    return diag_logpdf(np.broadcast_to(w.y_w, pred.shape), pred, var)


def approx_loglik(w, x0hat_w, rho_t):
    """log N(y'; s x0hat', (sigma_y^2 + rho_t^2 s_i^2) I) row-wise.

    The reconstruction-uncertainty likelihood: x0 given x_t is modeled as
    N(x0hat, rho_t^2 I), so the i-th observed coordinate carries extra
    variance rho_t^2 s_i^2. rho_t = 0 recovers the exact likelihood.
    """
    x0hat_w = np.atleast_2d(np.asarray(x0hat_w, dtype=np.float64))
    pred = x0hat_w[:, : w.d_y] * w.s
    var = w.sigma_y**2 + rho_t**2 * w.s**2
    if np.any(var <= 0.0):
        raise ValueError("approx_loglik needs sigma_y > 0 or rho_t > 0")
    return diag_logpdf(np.broadcast_to(w.y_w, pred.shape), pred, var)


def posterior_x0(w, x0hat_w, rho):
    """Gaussian posterior over x0 given y and the reconstruction prior.

    Combines the pseudo-prior N(x0hat, rho^2 I) with the measurement
    likelihood, coordinate-wise in the whitened basis:

        i < d_y : var_i  = rho^2 sigma_y^2 / (s_i^2 rho^2 + sigma_y^2)
                  mean_i = (s_i rho^2 y'_i + sigma_y^2 x0hat_i)
                           / (s_i^2 rho^2 + sigma_y^2)
        i >= d_y: mean_i = x0hat_i, var_i = rho^2.

    sigma_y = 0 pins observed coordinates at y'_i / s_i with zero
    variance. rho = 0 returns a Dirac at x0hat.
    """
    x0hat_w = np.atleast_2d(np.asarray(x0hat_w, dtype=np.float64))
    d_x = x0hat_w.shape[1]
    s, sy = w.s, w.sigma_y
    rho = float(rho)
    if rho < 0.0:
        raise ValueError("rho must be >= 0")
    if rho == 0.0 and sy == 0.0:
        raise ValueError("rho and sigma_y cannot both be 0")

    var = np.full(d_x, rho**2)
    mean = x0hat_w.copy()
    if rho == 0.0:
        # exact Dirac at the reconstruction: skip the arithmetic so the
        # zero-variance logpdf accepts x0hat itself
        return DiagGaussian(mean=mean, var=var)
    if sy == 0.0:
        var[: w.d_y] = 0.0
        mean[:, : w.d_y] = w.y_w / s
    else:
        denom = s**2 * rho**2 + sy**2
        var[: w.d_y] = rho**2 * sy**2 / denom
        mean[:, : w.d_y] = (s * rho**2 * w.y_w + sy**2 * x0hat_w[:, : w.d_y]) / denom
    return DiagGaussian(mean=mean, var=var)
