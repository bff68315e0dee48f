"""Linear long-memory sequences X_i = sum_k c_k eps_{i-k}, truncated at lag M.

The coefficients are regularly varying, ``c_k = k**(-beta) * L0(k)`` for
``k >= 1`` with ``c_0 = L0(0)``, and the innovations are i.i.d. with mean zero
and finite fourth moment. Paths are produced exactly for the truncated model:
innovations are drawn for indices ``-M, ..., n-1`` so the first observation
already sees a full window of past shocks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy import integrate

from . import _kernels

log = logging.getLogger(__name__)

#: total length (n + M) above which convolution goes through the FFT
FFT_CROSSOVER = 4096
#: paths with more than this many innovations are refused
MAX_INNOVATIONS = 2**28
#: largest truncation lag the tail_eps rule may return
MAX_TRUNCATION = 2**53
#: number of leading coefficients summed exactly before switching to integrals
_EXACT_HEAD = 2**20


class ModelError(ValueError):
    """Invalid model parameters."""


@dataclass(frozen=True)
class SlowlyVarying:
    """``L0(k) = c`` (``kind='constant'``) or ``L0(k) = log(k + e)**a`` (``kind='log_power'``)."""

    kind: str = "constant"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "log_power"):
            raise ModelError(f"unknown slowly varying kind {self.kind!r}")
        if self.kind == "constant" and not self.value > 0:
            raise ModelError("constant slowly varying function needs c > 0")

    @classmethod
    def constant(cls, c: float = 1.0) -> SlowlyVarying:
        return cls("constant", float(c))

    @classmethod
    def log_power(cls, a: float) -> SlowlyVarying:
        return cls("log_power", float(a))

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "constant":
            return np.full_like(k, self.value)
        return np.log(k + math.e) ** self.value

    def log_derivative(self, x):
        """d/dx log L0(x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        return self.value / ((x + math.e) * np.log(x + math.e))


def _check_beta(beta: float) -> None:
    if not (0.5 < beta < 1.0):
        raise ModelError(f"beta outside (0.5,1): {beta}")


def _power_sum(beta2: float, L0: SlowlyVarying, lo: int, hi: float) -> float:
    """sum_{k=lo}^{hi} k**(-beta2) * L0(k)**2 for 1 <= lo, hi possibly huge."""
    if hi < lo:
        return 0.0
    head_hi = int(min(hi, lo + _EXACT_HEAD - 1))
    k = np.arange(lo, head_hi + 1, dtype=float)
    total = math.fsum(k ** (-beta2) * L0(k) ** 2)
    if head_hi >= hi:
        return total
    # Euler-Maclaurin for the remainder (k = head_hi+1 .. hi)
    a, b = head_hi + 1.0, float(hi)
    g = lambda x: x ** (-beta2) * float(L0(x)) ** 2  # noqa: E731
    val, _ = integrate.quad(lambda u: g(math.exp(u)) * math.exp(u), math.log(a), math.log(b),
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return total + val + 0.5 * (g(a) + g(b))


def tail_variance_bound(beta: float, L0: SlowlyVarying, m: float) -> float:
    """Upper bound int_M^inf x**(-2 beta) L0(x)**2 dx on the discarded coefficient energy."""
    beta2 = 2.0 * beta
    if L0.kind == "constant":
        return L0.value**2 * m ** (1.0 - beta2) / (beta2 - 1.0)
    g = lambda u: math.exp((1.0 - beta2) * u) * float(L0(math.exp(u))) ** 2  # noqa: E731
    val, _ = integrate.quad(g, math.log(m), math.inf, epsabs=0.0, epsrel=1e-10, limit=200)
    return val


def retained_energy(beta: float, L0: SlowlyVarying, m: float) -> float:
    """sum_{k=0}^{M} c_k**2 (exact head plus Euler-Maclaurin remainder)."""
    return float(L0(0.0)) ** 2 + _power_sum(2.0 * beta, L0, 1, m)


def truncation_for(beta: float, L0: SlowlyVarying, tail_eps: float = 1e-4,
                   max_m: int = MAX_TRUNCATION) -> int:
    """Smallest M (to ~0.1%) whose tail energy bound is <= tail_eps * retained energy.

    Capped at ``max_m``; a warning is logged when the cap binds.
    """
    _check_beta(beta)

    def ok(m):
        return tail_variance_bound(beta, L0, m) <= tail_eps * retained_energy(beta, L0, m)

    if ok(1.0):
        return 1
    if not ok(float(max_m)):
        log.warning("tail_eps=%g unattainable below M=%d (beta=%g); using the cap", tail_eps, max_m, beta)
        return int(max_m)
    lo, hi = 0.0, math.log(max_m)
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if ok(math.exp(mid)):
            hi = mid
        else:
            lo = mid
    return int(math.ceil(math.exp(hi)))


@dataclass(frozen=True)
class CoefficientSpec:
    """Regularly varying MA coefficients truncated at lag ``truncation_m``.

    ``truncation_m=None`` picks M from ``tail_eps`` (see :func:`truncation_for`).
    """

    beta: float
    slowly_varying: SlowlyVarying = field(default_factory=SlowlyVarying)
    truncation_m: int | None = None
    tail_eps: float = 1e-4

    def __post_init__(self):
        _check_beta(self.beta)
        if self.truncation_m is None:
            object.__setattr__(self, "truncation_m",
                               truncation_for(self.beta, self.slowly_varying, self.tail_eps))
        elif int(self.truncation_m) < 1:
            raise ModelError(f"truncation M must be >= 1, got {self.truncation_m}")
        object.__setattr__(self, "truncation_m", int(self.truncation_m))

    def coefficient(self, k):
        """c_k for integer k >= 0, vectorised; no truncation applied."""
        k = np.asarray(k, dtype=float)
        return np.maximum(k, 1.0) ** (-self.beta) * self.slowly_varying(k)

    def tail_fraction(self) -> float:
        m = self.truncation_m
        return tail_variance_bound(self.beta, self.slowly_varying, m) / retained_energy(
            self.beta, self.slowly_varying, m)


def make_coefficients(spec: CoefficientSpec) -> np.ndarray:
    """c_0, ..., c_M for the truncated model."""
    if spec.truncation_m + 1 > MAX_INNOVATIONS:
        raise MemoryError(f"refusing to materialise {spec.truncation_m + 1} coefficients")
    return spec.coefficient(np.arange(spec.truncation_m + 1))


@dataclass(frozen=True)
class InnovationLaw:
    """Centred i.i.d. innovation distribution with a given variance.

    ``standard_normal`` satisfies the smoothness assumptions of the limit
    theory. ``scaled_uniform`` and ``centered_exponential_mix`` (equal mixture
    of ``E-1`` and ``1-E`` for ``E ~ Exp(1)``) are kept for robustness runs only:
    the first has a discontinuous density, the second a kink at the origin.
    """

    kind: str = "standard_normal"
    variance: float = 1.0

    KINDS = ("standard_normal", "scaled_uniform", "centered_exponential_mix")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ModelError(f"unknown innovation law {self.kind!r}")
        if not self.variance > 0:
            raise ModelError("innovation variance must be positive")

    @property
    def fourth_moment(self) -> float:
        v2 = self.variance**2
        return {"standard_normal": 3.0, "scaled_uniform": 1.8, "centered_exponential_mix": 9.0}[self.kind] * v2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        s = math.sqrt(self.variance)
        if self.kind == "standard_normal":
            return s * rng.standard_normal(size)
        if self.kind == "scaled_uniform":
            a = math.sqrt(3.0) * s
            return rng.uniform(-a, a, size)
        e = rng.standard_exponential(size) - 1.0
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return s * sign * e


class LinearProcessModel:
    """Coefficient array plus innovation law.

    Build from a :class:`CoefficientSpec` (the long-memory family) or from an
    explicit coefficient array (hand examples, white-noise controls). Instances
    are treated as immutable; the FFT of the coefficients is cached per length.
    """

    def __init__(self, coefficients: CoefficientSpec | np.ndarray,
                 innovations: InnovationLaw | None = None):
        self.innovations = innovations or InnovationLaw()
        if isinstance(coefficients, CoefficientSpec):
            self.spec: CoefficientSpec | None = coefficients
            self._c = None
        else:
            c = np.array(coefficients, dtype=float).ravel()
            if c.size < 1:
                raise ModelError("need at least one coefficient")
            c.setflags(write=False)
            self.spec = None
            self._c = c
        self._fft_cache: dict = {}

    def __repr__(self):
        src = self.spec if self.spec is not None else f"coefficients[{self.truncation_m + 1}]"
        return f"LinearProcessModel({src}, {self.innovations})"

    @property
    def beta(self) -> float | None:
        return None if self.spec is None else self.spec.beta

    @property
    def truncation_m(self) -> int:
        return self.spec.truncation_m if self.spec is not None else self._c.size - 1

    @cached_property
    def c(self) -> np.ndarray:
        if self._c is not None:
            return self._c
        c = make_coefficients(self.spec)
        c.setflags(write=False)
        return c

    @cached_property
    def marginal_variance(self) -> float:
        """Var(X_i) = Var(eps) * sum_k c_k**2 of the truncated model."""
        if self.spec is not None and self.spec.truncation_m + 1 > MAX_INNOVATIONS:
            return self.innovations.variance * retained_energy(
                self.spec.beta, self.spec.slowly_varying, self.spec.truncation_m)
        return self.innovations.variance * math.fsum(self.c**2)

    def coefficient_fft(self, length: int, squared: bool = False) -> np.ndarray:
        key = (length, squared)
        out = self._fft_cache.get(key)
        if out is None:
            c = self.c**2 if squared else self.c
            out = sfft.rfft(c, length)
            self._fft_cache[key] = out
        return out

    def to_dict(self) -> dict:
        d = {"truncation_m": self.truncation_m, "innovations": self.innovations.kind,
             "variance": self.innovations.variance}
        if self.spec is not None:
            d = {"beta": self.spec.beta, "slowly_varying": self.spec.slowly_varying.kind,
                 "slowly_varying_value": self.spec.slowly_varying.value, **d}
        return d


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Innovations eps_{-M..n-1} and the observations X_0..X_{n-1}."""

    n: int
    innovations: np.ndarray
    x: np.ndarray
    model: LinearProcessModel
    seed: int

    @property
    def current_innovations(self) -> np.ndarray:
        """eps_0 .. eps_{n-1}."""
        return self.innovations[self.model.truncation_m:]


@dataclass(frozen=True)
class PolynomialForms:
    y1: float
    y2: float


def _convolve(model: LinearProcessModel, signal: np.ndarray, n: int, squared: bool,
              method: str, crossover: int) -> np.ndarray:
    m = model.truncation_m
    total = signal.size
    if method == "auto":
        method = "fft" if total > crossover else "direct"
    if method == "direct":
        c = model.c**2 if squared else model.c
        return _kernels.convolve_valid(signal, np.ascontiguousarray(c))
    if method != "fft":
        raise ValueError(f"unknown convolution method {method!r}")
    # circular length >= n + M keeps outputs M..M+n-1 free of wrap-around
    length = sfft.next_fast_len(total, real=True)
    out = sfft.irfft(sfft.rfft(signal, length) * model.coefficient_fft(length, squared), length)
    return out[m:m + n]


def simulate_path(model: LinearProcessModel, n: int, seed: int, method: str = "auto",
                  crossover: int = FFT_CROSSOVER) -> SamplePath:
    """Draw n + M innovations from ``default_rng(seed)`` and convolve with the coefficients."""
    n = int(n)
    if n < 1:
        raise ModelError("n must be >= 1")
    total = n + model.truncation_m
    if total > MAX_INNOVATIONS:
        raise MemoryError(f"path needs {total} innovations (limit {MAX_INNOVATIONS})")
    rng = np.random.default_rng(int(seed))
    eps = model.innovations.sample(rng, total)
    x = _convolve(model, eps, n, False, method, crossover)
    eps.setflags(write=False)
    x.setflags(write=False)
    return SamplePath(n=n, innovations=eps, x=x, model=model, seed=int(seed))


def compute_y2(path: SamplePath, method: str = "auto", crossover: int = FFT_CROSSOVER) -> PolynomialForms:
    """Y_{n,1} = sum X_i and the second-order off-diagonal form Y_{n,2}.

    Inner lags start at 1, so the current shock eps_i never enters Y_{n,2}::

        sum_{1<=j1<j2} c_j1 c_j2 e_{i-j1} e_{i-j2} = ((sum_j c_j e_{i-j})**2 - sum_j c_j**2 e_{i-j}**2) / 2
    """
    model = path.model
    e0 = path.current_innovations
    c0 = model.c[0]
    s = path.x - c0 * e0
    sq = _convolve(model, path.innovations**2, path.n, True, method, crossover)
    t = sq - c0 * c0 * e0 * e0
    y2 = 0.5 * math.fsum(s * s - t)
    return PolynomialForms(y1=math.fsum(path.x), y2=y2)
