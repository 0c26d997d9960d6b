"""Hot-kernel backend selection.

The compiled extension is preferred when importable; otherwise the numpy
fallback is used. `DDSMC_PURE_PYTHON=1` forces the fallback. Both backends
produce byte-identical results across reruns at any thread-count setting;
the two backends agree with each other to floating-point roundoff (not
bit-exactly).
"""

import os

import numpy as np

from . import _numpy

if os.environ.get("DDSMC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _numpy
        BACKEND = "numpy"


def backend_name():
    """Name of the active backend: "compiled" or "numpy"."""
    return BACKEND


def _c2(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    # typed memoryviews reject read-only buffers (e.g. broadcast views)
    return a if a.flags.writeable else a.copy()


def _c1(a):
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64).ravel())
    return a if a.flags.writeable else a.copy()


def gmm_score(x, means, log_w, scale, var=1.0):
    """Score of sum_k w_k N(x; scale*mu_k, var*I) at the rows of x."""
    return _impl.gmm_score(_c2(x), _c2(means), _c1(log_w), float(scale), float(var))


def gmm_logpdf(x, means, log_w, scale, var=1.0):
    """Log density of sum_k w_k N(x; scale*mu_k, var*I) at the rows of x."""
    return _impl.gmm_logpdf(_c2(x), _c2(means), _c1(log_w), float(scale), float(var))


def diag_logpdf(x, mean, var):
    """Row-wise diagonal-Gaussian log density; var (d,) shared across rows."""
    x = _c2(x)
    mean = np.broadcast_to(mean, x.shape)
    return _impl.diag_logpdf(x, _c2(mean), _c1(var))


def w2sq_1d(a_sorted, b_sorted):
    """Exact squared W2 between sorted 1D empirical samples."""
    return float(_impl.w2sq_1d(_c1(a_sorted), _c1(b_sorted)))
