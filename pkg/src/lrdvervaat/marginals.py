"""Marginal laws F, f, f', Q, the density-quantile profile and regularity checks.

The profile works on the quantile scale: for ``y`` in (0, 1) it returns
``f(Q(y))``, ``f'(Q(y))`` and the y-derivatives of both. Everything is built from
the density and its first three x-derivatives through

    (fQ)'  = f'/f            (f'Q)'  = f''/f
    (fQ)'' = (f'' f - f'^2)/f^3   (f'Q)'' = (f''' f - f'' f')/f^3

evaluated at ``Q(y)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, interpolate, special

Y_MIN = 1e-10
Y_MAX = 1.0 - 1e-10


class UnsupportedCapability(RuntimeError):
    """The marginal cannot provide the requested quantity."""


def _check_unit(y):
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0.0)) or np.any(~(y < 1.0)):
        raise ValueError("quantile argument must lie in (0,1)")
    return y


def _check_profile_domain(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < Y_MIN) or np.any(y > Y_MAX):
        raise ValueError(f"profile evaluated outside [{Y_MIN}, {Y_MAX}]")
    return y


class MarginalModel:
    """Base class: subclasses provide cdf, quantile and density derivatives."""

    family = "abstract"

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, y):
        raise NotImplementedError

    def density_derivatives(self, x, order: int = 3):
        """Tuple (f, f', ..., f^(order)) at x."""
        raise NotImplementedError

    def pdf(self, x):
        return self.density_derivatives(x, 0)[0]

    def pdf_prime(self, x):
        return self.density_derivatives(x, 1)[1]

    def profile(self) -> DensityQuantileProfile:
        return density_quantile_profile(self)

    def to_dict(self) -> dict:
        return {"family": self.family}


class GaussianMarginal(MarginalModel):
    family = "gaussian"

    def __init__(self, sigma: float = 1.0):
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)

    def __repr__(self):
        return f"GaussianMarginal(sigma={self.sigma!r})"

    def cdf(self, x):
        return special.ndtr(np.asarray(x, dtype=float) / self.sigma)

    def quantile(self, y):
        return self.sigma * special.ndtri(_check_unit(y))

    def density_derivatives(self, x, order=3):
        s = self.sigma
        z = np.asarray(x, dtype=float) / s
        f = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * s)
        out = [f, -z / s * f, (z * z - 1) / s**2 * f, (3 * z - z**3) / s**3 * f]
        return tuple(out[: order + 1])

    def to_dict(self):
        return {"family": self.family, "sigma": self.sigma}


class ParetoTailMarginal(MarginalModel):
    """Symmetric density K|x|**(-alpha) for |x| > delta, even sextic on [-delta, delta].

    The sextic matches the tail's value and first three derivatives at
    ``delta`` (so f is C^3), and K normalises the total mass to one.
    """

    family = "pareto_tail"

    def __init__(self, alpha: float = 4.0, delta: float = 1.0):
        if not alpha > 2:
            raise ValueError("pareto_tail needs alpha > 2")
        if not delta > 0:
            raise ValueError("pareto_tail needs delta > 0")
        self.alpha = float(alpha)
        self.delta = float(delta)
        a, d = self.alpha, self.delta
        # rows: value, first, second, third derivative of a0 + a2 x^2 + a4 x^4 + a6 x^6 at d
        A = np.array([
            [1, d**2, d**4, d**6],
            [0, 2 * d, 4 * d**3, 6 * d**5],
            [0, 2, 12 * d**2, 30 * d**4],
            [0, 0, 24 * d, 120 * d**3],
        ])
        rhs = np.array([d**-a, -a * d ** (-a - 1), a * (a + 1) * d ** (-a - 2),
                        -a * (a + 1) * (a + 2) * d ** (-a - 3)])
        coef = np.linalg.solve(A, rhs)
        mass = 2 * (coef[0] * d + coef[1] * d**3 / 3 + coef[2] * d**5 / 5 + coef[3] * d**7 / 7) \
            + 2 * d ** (1 - a) / (a - 1)
        self.K = 1.0 / mass
        self._even = self.K * coef
        # ascending power coefficients of the core density and its antiderivative
        p = np.zeros(7)
        p[[0, 2, 4, 6]] = self._even
        self._poly = np.polynomial.Polynomial(p)
        self._anti = self._poly.integ()
        grid = np.linspace(0, d, 2001)
        if np.any(self._poly(grid) <= 0):
            raise ValueError(f"interpolating core not positive for alpha={a}, delta={d}")
        #: constant c in F(x) = 1 - c x**(1-alpha), x > delta
        self.c = self.K / (a - 1)
        self._f_delta = 0.5 + float(self._anti(d))

    def __repr__(self):
        return f"ParetoTailMarginal(alpha={self.alpha!r}, delta={self.delta!r})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        a, d = self.alpha, self.delta
        ax = np.maximum(np.abs(x), d)
        tail = self.c * ax ** (1 - a)
        core = 0.5 + self._anti(np.clip(x, -d, d))
        return np.where(x > d, 1.0 - tail, np.where(x < -d, tail, core))

    def quantile(self, y):
        y = _check_unit(y)
        a, d = self.alpha, self.delta
        fd = self._f_delta
        upper = (self.c / np.maximum(1.0 - y, 1e-300)) ** (1.0 / (a - 1))
        lower = -((self.c / np.maximum(y, 1e-300)) ** (1.0 / (a - 1)))
        core = self._core_quantile(np.clip(y, 1 - fd, fd))
        return np.where(y > fd, upper, np.where(y < 1 - fd, lower, core))

    def _core_quantile(self, y):
        target = y - 0.5
        lo = np.full_like(target, -self.delta)
        hi = np.full_like(target, self.delta)
        x = np.zeros_like(target)
        dpoly = self._poly
        for _ in range(100):
            gx = self._anti(x) - target
            lo = np.where(gx < 0, x, lo)
            hi = np.where(gx >= 0, x, hi)
            step = x - gx / dpoly(x)
            inside = (step > lo) & (step < hi)
            x_new = np.where(inside, step, 0.5 * (lo + hi))
            if np.all(np.abs(x_new - x) <= 1e-15 * (1 + np.abs(x))):
                x = x_new
                break
            x = x_new
        return x

    def density_derivatives(self, x, order=3):
        x = np.asarray(x, dtype=float)
        a, d, K = self.alpha, self.delta, self.K
        ax = np.maximum(np.abs(x), d)
        sgn = np.sign(x)
        tail = [K * ax**-a,
                -sgn * a * K * ax ** (-a - 1),
                a * (a + 1) * K * ax ** (-a - 2),
                -sgn * a * (a + 1) * (a + 2) * K * ax ** (-a - 3)]
        core_in = np.clip(x, -d, d)
        out = []
        poly = self._poly
        for j in range(order + 1):
            core = poly(core_in)
            out.append(np.where(np.abs(x) > d, tail[j], core))
            poly = poly.deriv()
        return tuple(out)

    def total_mass(self) -> float:
        d = self.delta
        core, _ = integrate.quad(lambda t: float(self._poly(t)), -d, d, epsabs=1e-14, epsrel=1e-13)
        tail, _ = integrate.quad(lambda t: self.K * t**-self.alpha, d, np.inf, epsabs=1e-14, epsrel=1e-13)
        return core + 2 * tail

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha, "delta": self.delta}


class EmpiricalOracleMarginal(MarginalModel):
    """Monotone F-hat / Q-hat tables from a large i.i.d. sample of X_1.

    Each draw is ``sum_{k<K0} c_k eps_k`` plus an independent normal term
    carrying the variance of the remaining coefficients (exact for Gaussian
    innovations, a Lindeberg approximation otherwise). F-hat and Q-hat are
    piecewise-linear inverses of each other on a table of sample quantiles.
    With ``derivative_tables=True`` a smoothing spline in normal-score space
    is fitted to Q-hat and densities come from central differences of it.
    """

    family = "empirical_oracle"

    def __init__(self, model, sample_size: int = 10**7, seed: int = 0, derivative_tables: bool = False,
                 head_terms: int = 64, nodes: int = 2049, chunk: int = 2**18):
        self.model = model
        self.sample_size = int(sample_size)
        self.seed = int(seed)
        self.derivative_tables = bool(derivative_tables)
        c = np.asarray(model.c)
        k0 = min(head_terms, c.size)
        head = c[:k0]
        rest_var = model.innovations.variance * math.fsum(c[k0:] ** 2)
        rng = np.random.default_rng(self.seed)
        parts = []
        left = self.sample_size
        while left > 0:
            b = min(chunk, left)
            eps = model.innovations.sample(rng, b * k0).reshape(b, k0)
            parts.append(eps @ head + math.sqrt(rest_var) * rng.standard_normal(b))
            left -= b
        sample = np.sort(np.concatenate(parts))
        zmax = special.ndtri(1.0 - 1.0 / self.sample_size)
        z = np.linspace(-zmax, zmax, nodes)
        self._p = special.ndtr(z)
        self._x = np.quantile(sample, self._p)
        # keep the table strictly increasing
        self._x = np.maximum.accumulate(self._x + np.arange(nodes) * 1e-15 * (1 + np.abs(self._x)))
        self._z = z
        self._spline = None
        if self.derivative_tables:
            w = np.sqrt(self._p * (1 - self._p))
            self._spline = interpolate.UnivariateSpline(z, self._x, w=w / w.mean(), k=5,
                                                        s=nodes * (1.0 / math.sqrt(self.sample_size)) ** 2)

    def __repr__(self):
        return f"EmpiricalOracleMarginal(sample_size={self.sample_size}, seed={self.seed})"

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self._x, self._p)

    def quantile(self, y):
        y = _check_unit(y)
        return np.interp(y, self._p, self._x)

    def _q_derivatives(self, y):
        """Q', Q'', Q''' of the smoothed quantile function, central differences with step ~ y(1-y)."""
        if self._spline is None:
            raise UnsupportedCapability("empirical oracle built without derivative tables")
        y = np.asarray(y, dtype=float)
        h = 1e-3 * np.minimum(y, 1 - y)

        def q(v):
            return self._spline(special.ndtri(v))

        q0, qp, qm = q(y), q(y + h), q(y - h)
        qp2, qm2 = q(y + 2 * h), q(y - 2 * h)
        d1 = (qp - qm) / (2 * h)
        d2 = (qp - 2 * q0 + qm) / h**2
        d3 = (qp2 - 2 * qp + 2 * qm - qm2) / (2 * h**3)
        return d1, d2, d3

    def density_derivatives(self, x, order=3):
        y = np.clip(self.cdf(x), Y_MIN, Y_MAX)
        q1, q2, q3 = self._q_derivatives(y)
        f = 1.0 / q1
        f1 = -q2 / q1**3
        # d/dx = (1/Q') d/dy
        f2 = (-q3 / q1**3 + 3 * q2**2 / q1**4) / q1
        out = [f, f1, f2]
        if order >= 3:
            raise UnsupportedCapability("third density derivative not tabulated for the oracle")
        return tuple(out[: order + 1])

    def profile_terms(self, y):
        q1, q2, q3 = self._q_derivatives(y)
        fq = 1.0 / q1
        fpq = -q2 / q1**3
        fq_p = -q2 / q1**2
        fq_pp = -q3 / q1**2 + 2 * q2**2 / q1**3
        fpq_p = -q3 / q1**3 + 3 * q2**2 / q1**4
        return fq, fpq, fq_p, fq_pp, fpq_p

    def to_dict(self):
        return {"family": self.family, "sample_size": self.sample_size, "seed": self.seed}


def gaussian(sigma: float = 1.0) -> GaussianMarginal:
    return GaussianMarginal(sigma)


def pareto_tail(alpha: float = 4.0, delta: float = 1.0) -> ParetoTailMarginal:
    return ParetoTailMarginal(alpha, delta)


def eval_marginal(model: MarginalModel, which: str, arg):
    """Evaluate F, f, fprime or Q."""
    if which == "F":
        return model.cdf(arg)
    if which == "Q":
        return model.quantile(arg)
    if which == "f":
        return model.pdf(arg)
    if which == "fprime":
        return model.pdf_prime(arg)
    raise ValueError(f"unknown marginal quantity {which!r}")


@dataclass(frozen=True)
class DensityQuantileProfile:
    """Callables of y in [1e-10, 1-1e-10]: fQ, f'Q and their y-derivatives."""

    marginal: MarginalModel = field(repr=False)

    def _terms(self, y, order=3):
        y = _check_profile_domain(y)
        m = self.marginal
        if isinstance(m, EmpiricalOracleMarginal):
            return m.profile_terms(y)
        x = m.quantile(y)
        return m.density_derivatives(x, order)

    def fQ(self, y):
        return self._terms(y, 0)[0]

    def fprimeQ(self, y):
        if isinstance(self.marginal, EmpiricalOracleMarginal):
            return self._terms(y)[1]
        return self._terms(y, 1)[1]

    def fQ_prime(self, y):
        t = self._terms(y, 1)
        if isinstance(self.marginal, EmpiricalOracleMarginal):
            return t[2]
        return t[1] / t[0]

    def fQ_second(self, y):
        t = self._terms(y, 2)
        if isinstance(self.marginal, EmpiricalOracleMarginal):
            return t[3]
        f, f1, f2 = t
        return (f2 * f - f1 * f1) / f**3

    def fprimeQ_prime(self, y):
        t = self._terms(y, 2)
        if isinstance(self.marginal, EmpiricalOracleMarginal):
            return t[4]
        return t[2] / t[0]

    def fprimeQ_second(self, y):
        if isinstance(self.marginal, EmpiricalOracleMarginal):
            raise UnsupportedCapability("(f'Q)'' needs a third density derivative")
        f, f1, f2, f3 = self._terms(y, 3)
        return (f3 * f - f2 * f1) / f**3


def density_quantile_profile(model: MarginalModel) -> DensityQuantileProfile:
    if isinstance(model, EmpiricalOracleMarginal) and not model.derivative_tables:
        raise UnsupportedCapability("empirical oracle built without derivative tables")
    return DensityQuantileProfile(model)


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    mu: float
    grid_sup: float
    sup_location: float
    verdict: str
    level_sups: list

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), **kw)


def _weighted(profile: DensityQuantileProfile, condition: str, mu: float, y):
    w = y * (1 - y)
    if condition == "A":
        parts = (profile.fQ(y), profile.fprimeQ(y))
        weight = w ** -(1 - mu)
    elif condition == "B":
        parts = (profile.fQ_prime(y), profile.fprimeQ_prime(y))
        weight = w**mu
    elif condition == "C":
        parts = (profile.fQ_second(y), profile.fprimeQ_second(y))
        weight = w ** (1 + mu)
    else:
        raise ValueError(f"unknown condition {condition!r}")
    return np.maximum(np.abs(parts[0]), np.abs(parts[1])) * weight


def refinement_grid(level: int, interior: int = 2001, per_decade: int = 100) -> np.ndarray:
    """Uniform interior grid plus geometric points down to 10**-level on both sides."""
    inner = np.linspace(0.01, 0.99, interior)
    s = np.linspace(1.0, float(level), max(2, int((level - 1) * per_decade) + 1))
    edge = 10.0**-s
    return np.unique(np.concatenate([edge, inner, 1.0 - edge]))


def check_condition(model: MarginalModel, condition: str, mu: float, levels: int = 10,
                    tolerance: float = 0.01) -> ConditionReport:
    """Weighted sup of condition (A), (B) or (C) over g in {f, f'}.

    The grid is refined toward both endpoints one decade per level, down to
    10**-levels. The verdict is ``bounded`` iff the running sup grew by less
    than ``tolerance`` (relative) over the last two levels; non-finite values
    count as ``unbounded-trend``.
    """
    if condition == "A" and not (0 < mu < 0.5):
        raise ValueError("condition A needs 0 < mu < 1/2")
    if condition in ("B", "C") and mu < 0:
        raise ValueError("conditions B and C need mu >= 0 (mu = 0 is the unweighted probe)")
    profile = density_quantile_profile(model)
    sups, locs = [], []
    for level in range(1, levels + 1):
        y = refinement_grid(level)
        with np.errstate(all="ignore"):
            vals = _weighted(profile, condition, mu, y)
        if not np.all(np.isfinite(vals)):
            sups.append(math.inf)
            locs.append(float(y[np.argmax(~np.isfinite(vals))]))
            continue
        i = int(np.argmax(vals))
        sups.append(float(vals[i]))
        locs.append(float(y[i]))
    running = np.maximum.accumulate(sups)
    last, ref = running[-1], running[-3] if len(running) >= 3 else running[0]
    if not math.isfinite(last) or ref <= 0:
        verdict = "unbounded-trend" if not math.isfinite(last) else "bounded"
    else:
        verdict = "bounded" if (last - ref) / ref < tolerance else "unbounded-trend"
    i = int(np.argmax(sups))
    return ConditionReport(condition=condition, mu=float(mu), grid_sup=float(last),
                           sup_location=locs[i], verdict=verdict,
                           level_sups=[float(s) for s in running])
