"""Hot inner loops, compiled with numba when available.

Every kernel exists twice: a ``*_numba`` version decorated with ``@njit`` and a
``*_numpy`` version built from vectorised numpy calls. The public name (no
suffix) is bound at import time to the faster of the two when numba is
enabled. Set ``LRDVERVAAT_DISABLE_JIT=1`` to force the numpy path (useful for
debugging and for the benchmark script).
"""

import logging
import os

import numpy as np

log = logging.getLogger(__name__)

_DISABLE = os.environ.get("LRDVERVAAT_DISABLE_JIT", "0").strip().lower() in ("1", "true", "yes")

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrapper(f):
            return f

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrapper


USE_JIT = HAVE_NUMBA and not _DISABLE


# ---------------------------------------------------------------------------
# direct linear convolution, "valid" part only
# ---------------------------------------------------------------------------

@njit(cache=True)
def convolve_valid_numba(e, c):
    m = c.shape[0] - 1
    n = e.shape[0] - m
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        base = i + m
        for k in range(m + 1):
            acc += c[k] * e[base - k]
        out[i] = acc
    return out


def convolve_valid_numpy(e, c):
    return np.convolve(e, c, mode="valid")


# ---------------------------------------------------------------------------
# exact integrals of the empirical distribution and quantile step functions
# ---------------------------------------------------------------------------

@njit(cache=True)
def step_integrals_numba(u, t):
    """Return (int_0^t E_n, int_0^t U_n) for each t (u sorted ascending)."""
    n = u.shape[0]
    m = t.shape[0]
    ecdf_int = np.empty(m)
    quant_int = np.empty(m)
    # prefix sums of the order statistics
    csum = np.empty(n + 1)
    csum[0] = 0.0
    for i in range(n):
        csum[i + 1] = csum[i] + u[i]
    for j in range(m):
        tj = t[j]
        # number of sample points <= tj
        lo = 0
        hi = n
        while lo < hi:
            mid = (lo + hi) // 2
            if u[mid] <= tj:
                lo = mid + 1
            else:
                hi = mid
        cnt = lo
        ecdf_int[j] = (cnt * tj - csum[cnt]) / n
        if tj <= 0.0:
            quant_int[j] = 0.0
            continue
        k = int(np.ceil(n * tj))
        if (k - 1) / n >= tj:
            k -= 1
        elif k / n < tj:
            k += 1
        if k < 1:
            k = 1
        if k > n:
            k = n
        quant_int[j] = csum[k - 1] / n + (tj - (k - 1) / n) * u[k - 1]
    return ecdf_int, quant_int


def step_integrals_numpy(u, t):
    n = u.shape[0]
    t = np.asarray(t, dtype=float)
    csum = np.concatenate(([0.0], np.cumsum(u)))
    cnt = np.searchsorted(u, t, side="right")
    ecdf_int = (cnt * t - csum[cnt]) / n
    k = ceil_index(n, t)
    quant_int = csum[k - 1] / n + (t - (k - 1) / n) * u[k - 1]
    quant_int = np.where(t <= 0.0, 0.0, quant_int)
    return ecdf_int, quant_int


def ceil_index(n, y):
    """Integer ``ceil(n*y)`` robust to round-off at the nodes ``k/n``, clipped to [1, n]."""
    y = np.asarray(y, dtype=float)
    k = np.ceil(n * y).astype(np.int64)
    k = np.where((k - 1) / n >= y, k - 1, k)
    k = np.where(k / n < y, k + 1, k)
    return np.clip(k, 1, n)


# np.convolve beats the compiled loop at every size we use (see benchmarks/), so the
# direct convolution stays on numpy under both backends
convolve_valid = convolve_valid_numpy
if USE_JIT:
    step_integrals = step_integrals_numba
else:
    step_integrals = step_integrals_numpy


def backend():
    return "numba" if USE_JIT else "numpy"
