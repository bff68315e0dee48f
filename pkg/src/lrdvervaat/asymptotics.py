"""Covariances, normalising constants, rate schedules and limit laws."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy import integrate, special, stats

from .model import CoefficientSpec, LinearProcessModel

#: coefficient arrays longer than this are handled by the head + tail route
_FFT_LIMIT = 2**23
_HEAD = 2**20
_PANELS = 64
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class DegenerateLimitError(ValueError):
    """The limit law has zero scale at the requested location."""


@dataclass(frozen=True, eq=False)
class CovarianceStructure:
    """rho_0..rho_{n_max} of the truncated model, rho_k = Var(eps) sum_l c_l c_{l+k}."""

    rho: np.ndarray
    var_eps: float

    @property
    def n_max(self) -> int:
        return self.rho.size - 1


def _fft_autocov(c: np.ndarray, n_max: int) -> np.ndarray:
    m = c.size - 1
    length = sfft.next_fast_len(m + 1 + n_max + 1, real=True)
    cf = sfft.rfft(c, length)
    ac = sfft.irfft(cf.real**2 + cf.imag**2, length)[: min(n_max, m) + 1]
    out = np.zeros(n_max + 1)
    out[: ac.size] = ac
    return out


def _tail_sums(spec: CoefficientSpec, a: float, k: np.ndarray) -> np.ndarray:
    """sum_{l=a}^{M-k} c_l c_{l+k} for l >= a >= 1 by Euler-Maclaurin.

    The integral is a composite Gauss-Legendre rule in log(l); the end
    corrections include the first derivative term.
    """
    beta, L0, m = spec.beta, spec.slowly_varying, float(spec.truncation_m)
    out = np.zeros(k.size)
    b = m - k
    live = b > a
    if not np.any(live):
        return out

    def g(x, kk):
        return (x * (x + kk)) ** (-beta) * L0(x) * L0(x + kk)

    def dg(x, kk):
        return g(x, kk) * (-beta / x - beta / (x + kk) + L0.log_derivative(x) + L0.log_derivative(x + kk))

    s_nodes = (np.arange(_PANELS)[:, None] + 0.5 * (_GL_X[None, :] + 1.0)).ravel() / _PANELS
    s_weights = np.tile(_GL_W, _PANELS) / (2.0 * _PANELS)
    la = math.log(a)
    for start in range(0, k.size, 4096):
        sl = slice(start, start + 4096)
        kk = k[sl][:, None].astype(float)
        bb = b[sl]
        lv = live[sl]
        lb = np.log(np.where(lv, bb, a + 1.0))[:, None]
        u = la + (lb - la) * s_nodes[None, :]
        x = np.exp(u)
        integral = (lb[:, 0] - la) * ((g(x, kk) * x) @ s_weights)
        bx = np.where(lv, bb, a + 1.0)
        k1 = kk[:, 0]
        corr = 0.5 * (g(a, k1) + g(bx, k1)) + (dg(bx, k1) - dg(a, k1)) / 12.0
        out[sl] = np.where(lv, integral + corr, 0.0)
    return out


def autocovariances(coefficients: CoefficientSpec | LinearProcessModel | np.ndarray,
                    var_eps: float = 1.0, n_max: int = 0, head: int = _HEAD,
                    method: str = "auto") -> CovarianceStructure:
    """Exact autocovariances rho_0..rho_{n_max} of the truncated linear process.

    Materialisable coefficient arrays go through one FFT autocorrelation. For
    truncation lags too large to store, the first ``head`` products are summed
    exactly (FFT cross-correlation) and the remainder by Euler-Maclaurin.
    ``method`` forces one route ("fft" or "split"); the split route needs a
    :class:`CoefficientSpec`.
    """
    if isinstance(coefficients, LinearProcessModel):
        var_eps = coefficients.innovations.variance
        spec = coefficients.spec
        c = coefficients.c if spec is None or spec.truncation_m < _FFT_LIMIT else None
    elif isinstance(coefficients, CoefficientSpec):
        spec = coefficients
        c = None if spec.truncation_m >= _FFT_LIMIT else spec.coefficient(np.arange(spec.truncation_m + 1))
    else:
        spec = None
        c = np.asarray(coefficients, dtype=float)
    n_max = int(n_max)
    if method == "split":
        if spec is None:
            raise ValueError("split route needs a CoefficientSpec")
        c = None
    elif method == "fft" and c is None:
        c = spec.coefficient(np.arange(spec.truncation_m + 1))
    if c is not None:
        rho = _fft_autocov(c, n_max)
    else:
        if spec.truncation_m < head + n_max + 1:
            raise MemoryError("truncation too small for the head/tail split; lower head")
        cb = spec.coefficient(np.arange(head + n_max + 1))
        ca = cb[: head + 1]
        length = sfft.next_fast_len(ca.size + cb.size, real=True)
        cross = sfft.irfft(np.conj(sfft.rfft(ca, length)) * sfft.rfft(cb, length), length)[: n_max + 1]
        rho = cross + _tail_sums(spec, head + 1.0, np.arange(n_max + 1))
    rho = var_eps * rho
    rho.setflags(write=False)
    return CovarianceStructure(rho=rho, var_eps=float(var_eps))


def sigma_n1_exact(cov: CovarianceStructure, n: int) -> float:
    """sqrt(Var(sum_{i<=n} X_i)) = sqrt(n rho_0 + 2 sum_k (n-k) rho_k)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n - 1 > cov.n_max:
        raise ValueError(f"need rho up to lag {n - 1}, have {cov.n_max}")
    k = np.arange(1, n)
    return math.sqrt(n * cov.rho[0] + 2.0 * math.fsum((n - k) * cov.rho[1:n]))


def karamata_constant(beta: float) -> float:
    """B(2 beta - 1, 1 - beta), the limit of L(k) / L0(k)**2."""
    return float(special.beta(2.0 * beta - 1.0, 1.0 - beta))


def sigma_n1_asymptotic(spec: CoefficientSpec, n: float, var_eps: float = 1.0) -> float:
    b = spec.beta
    l0 = float(spec.slowly_varying(n))
    return math.sqrt(var_eps * karamata_constant(b) / ((1 - b) * (3 - 2 * b))) * n ** ((3 - 2 * b) / 2) * l0


def sigma_n2_asymptotic(spec: CoefficientSpec, n: float, var_eps: float = 1.0) -> float:
    """Order-of-magnitude scale n**(1 - (2 beta - 1)) L0(n)**2 (unit constant)."""
    b = spec.beta
    return var_eps * n ** (1.0 - (2 * b - 1)) * float(spec.slowly_varying(n)) ** 2


def rate_schedule(spec: CoefficientSpec, n: int, C_delta: float = 1.0, p: int = 2):
    """(delta_n, a_n, d_{n,p}, regime) with regime 1 iff (p+1)(2 beta - 1) > 1."""
    if n < 16:
        raise ValueError(f"rate schedule needs n >= 16 (log log n), got {n}")
    b = spec.beta
    l0 = float(spec.slowly_varying(n))
    ln = math.log(n)
    lln = math.log(ln)
    delta = C_delta * n ** (-(2 * b - 1)) * l0**2 * lln
    a_n = n ** (-(b - 0.5)) * l0 * math.sqrt(lln)
    if (p + 1) * (2 * b - 1) > 1:
        d = n ** (-(1 - b)) / l0 * ln**2.5 * lln**0.75
        regime = 1
    else:
        d = n ** (-p * (b - 0.5)) * l0**p * math.sqrt(ln) * lln**0.75
        regime = 2
    return delta, a_n, d, regime


@dataclass(frozen=True)
class ScalingConstants:
    n: int
    beta: float
    var_eps: float
    sigma_n1_exact: float
    sigma_n1_asym: float
    sigma_n2_asym: float
    delta_n: float | None
    a_n: float | None
    d_n2: float | None
    d_n2_regime: int | None
    C_delta: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)


def sigma_constants(cov: CovarianceStructure, spec: CoefficientSpec, n: int,
                    C_delta: float = 1.0) -> ScalingConstants:
    exact = sigma_n1_exact(cov, n)
    if n >= 16:
        delta, a_n, d2, regime = rate_schedule(spec, n, C_delta)
    else:
        delta = a_n = d2 = regime = None
    return ScalingConstants(
        n=int(n), beta=spec.beta, var_eps=cov.var_eps, sigma_n1_exact=exact,
        sigma_n1_asym=sigma_n1_asymptotic(spec, n, cov.var_eps),
        sigma_n2_asym=sigma_n2_asymptotic(spec, n, cov.var_eps),
        delta_n=delta, a_n=a_n, d_n2=d2, d_n2_regime=regime, C_delta=float(C_delta),
    )


def lil_integral_quadrature(beta: float) -> float:
    """int_0^inf x**(-beta) (1+x)**(-beta) dx by adaptive quadrature.

    Split at 1; the upper half is mapped to (0, 1] with x = 1/s, and both
    endpoint singularities are handled by the algebraic weight of QUADPACK.
    """
    lower, _ = integrate.quad(lambda x: (1 + x) ** (-beta), 0, 1, weight="alg", wvar=(-beta, 0),
                              epsabs=1e-14, epsrel=1e-13)
    upper, _ = integrate.quad(lambda s: (1 + s) ** (-beta), 0, 1, weight="alg", wvar=(2 * beta - 2, 0),
                              epsabs=1e-14, epsrel=1e-13)
    return lower + upper


def lil_constant(beta: float, p: int = 1) -> float:
    """c(beta, p) with c**2 = B(2 beta - 1, 1 - beta) / ((1 - beta)(3 - 2 beta)); no p dependence."""
    if not (0.5 < beta < 1):
        raise ValueError(f"beta outside (0.5,1): {beta}")
    return math.sqrt(karamata_constant(beta) / ((1 - beta) * (3 - 2 * beta)))


def vervaat_error_prefactor(beta: float) -> float:
    """((3 - 2 beta)(1 - beta))**(-3/2)."""
    return ((3 - 2 * beta) * (1 - beta)) ** -1.5


@dataclass(frozen=True)
class LimitLaw:
    """scale(location) * Z**2, scale(location) * Z**3, or Z, for Z standard normal."""

    kind: str
    scale: Callable[[float], float] = lambda loc: 1.0

    KINDS = ("z1_squared_scaled", "z1_cubed_scaled", "standard_normal")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown limit law {self.kind!r}")

    def scale_at(self, location: float | None = None) -> float:
        s = 1.0 if self.kind == "standard_normal" else float(self.scale(location))
        if s == 0.0 or not math.isfinite(s):
            raise DegenerateLimitError(f"{self.kind} has scale {s} at {location}")
        return s

    def cdf_function(self, location: float | None = None) -> Callable:
        if self.kind == "standard_normal":
            return special.ndtr
        s = self.scale_at(location)
        if self.kind == "z1_squared_scaled":
            chi2 = stats.chi2(1)
            if s > 0:
                return lambda w: chi2.cdf(np.asarray(w) / s)
            return lambda w: chi2.sf(np.asarray(w) / s)
        # s Z^3 has the law of |s| Z^3 by symmetry
        a = abs(s)
        return lambda w: special.ndtr(np.cbrt(np.asarray(w) / a))

    def cdf(self, w, location: float | None = None):
        return self.cdf_function(location)(w)


def limit_law(theorem: str, profile=None, beta: float | None = None,
              prefactor: float | None = None) -> LimitLaw:
    """Limit law of the theorem's statistic at a location (y or t).

    ``cor12``: f'(Q(y)) Z**2; ``thm13``: fQ(t)**2 Z**2; ``thm14``:
    prefactor * fQ(t)**2 (fQ)'(t) Z**3 with the prefactor defaulting to
    ((3-2 beta)(1-beta))**(-3/2); ``clt``: Z.
    """
    if theorem == "clt":
        return LimitLaw("standard_normal")
    if profile is None:
        raise ValueError(f"{theorem} needs a density-quantile profile")
    if theorem == "cor12":
        return LimitLaw("z1_squared_scaled", lambda y: float(profile.fprimeQ(y)))
    if theorem == "thm13":
        return LimitLaw("z1_squared_scaled", lambda t: float(profile.fQ(t)) ** 2)
    if theorem == "thm14":
        k = vervaat_error_prefactor(beta) if prefactor is None else float(prefactor)
        return LimitLaw("z1_cubed_scaled",
                        lambda t: k * float(profile.fQ(t)) ** 2 * float(profile.fQ_prime(t)))
    raise ValueError(f"no limit law for {theorem!r}")
