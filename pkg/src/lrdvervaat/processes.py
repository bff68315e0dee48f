"""Empirical, quantile, Bahadur-Kiefer, Vervaat and Vervaat-error processes.

All processes are built from the uniform sample ``U_i = F(X_i)`` and its
empirical distribution ``E_n`` (right-continuous) and quantile function
``U_n(y) = U_{ceil(ny):n}`` (left-continuous). Integrals of these step
functions are computed in closed form, so nothing here carries quadrature
error. Sup statistics are taken over grids that contain every jump point
(and its one-sided neighbours) inside the window.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import ceil_index, step_integrals
from .marginals import (
    Y_MAX,
    Y_MIN,
    EmpiricalOracleMarginal,
    GaussianMarginal,
    MarginalModel,
)

log = logging.getLogger(__name__)

KINDS = ("alpha", "beta", "u", "q", "bk", "vervaat", "vervaat_error", "a_n")


class MarginalMismatchError(ValueError):
    """The marginal does not describe the path's model."""


class GridMismatchError(ValueError):
    """Two process evaluations live on different grids or scalings."""


@dataclass(frozen=True)
class StepProcess:
    """Step function with jumps at ``jump_points``.

    ``values[k]`` is the value on the k-th piece; there are
    ``len(jump_points) + 1`` pieces. ``continuity='right'`` gives the
    distribution-function convention, ``'left'`` the quantile convention.
    """

    jump_points: np.ndarray
    values: np.ndarray
    continuity: str = "right"
    domain: str = "real"

    def __post_init__(self):
        jp = np.asarray(self.jump_points, dtype=float)
        if jp.size > 1 and np.any(np.diff(jp) <= 0):
            raise ValueError("jump points must be strictly increasing")
        if len(self.values) != jp.size + 1:
            raise ValueError("need one value per piece")
        if self.continuity not in ("right", "left"):
            raise ValueError("continuity must be 'right' or 'left'")

    def __call__(self, x):
        side = "right" if self.continuity == "right" else "left"
        idx = np.searchsorted(self.jump_points, np.asarray(x, dtype=float), side=side)
        return np.asarray(self.values)[idx]

    @classmethod
    def empirical_cdf(cls, sample, domain="real"):
        s = np.sort(np.asarray(sample, dtype=float))
        n = s.size
        return cls(s, np.arange(n + 1) / n, "right", domain)

    @classmethod
    def sample_quantile(cls, sample):
        """Left-continuous quantile y -> X_{ceil(ny):n} on [0, 1]; y = 0 maps to X_{1:n}."""
        s = np.sort(np.asarray(sample, dtype=float))
        n = s.size
        jp = np.arange(1, n) / n
        return cls(jp, s, "left", "unit")


@dataclass(frozen=True, eq=False)
class ProcessEvaluation:
    kind: str
    grid: np.ndarray
    values: np.ndarray
    scaling: object = field(default=None, repr=False)
    sigma_n1: float = 1.0
    n: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown process kind {self.kind!r}")
        g = np.asarray(self.grid)
        if g.size > 1 and np.any(np.diff(g) < 0):
            raise ValueError("grid must be sorted")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("process values must be finite")

    def sup_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if len(self.values) else 0.0

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["y", "value"])
        for y, v in zip(self.grid, self.values):
            w.writerow([repr(float(y)), repr(float(v))])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        sc = self.scaling.to_dict() if hasattr(self.scaling, "to_dict") else None
        return {"kind": self.kind, "n": int(self.n), "sigma_n1": float(self.sigma_n1),
                "grid": [float(v) for v in self.grid], "values": [float(v) for v in self.values],
                "scaling": sc}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _aligned(a: ProcessEvaluation, b: ProcessEvaluation):
    if len(a.grid) != len(b.grid) or not np.array_equal(a.grid, b.grid):
        raise GridMismatchError("process grids differ")
    if a.sigma_n1 != b.sigma_n1 or a.n != b.n:
        raise GridMismatchError("process scalings differ")


# ---------------------------------------------------------------------------
# uniform sample
# ---------------------------------------------------------------------------

def _nudge_ties(u: np.ndarray) -> np.ndarray:
    """Sorted copy with bit-identical duplicates pushed apart by one ulp each."""
    u = np.sort(np.asarray(u, dtype=float))
    dup = np.diff(u) <= 0
    if np.any(dup):
        log.warning("%d tied uniform values nudged apart", int(dup.sum()))
        for i in range(1, u.size):
            if u[i] <= u[i - 1]:
                u[i] = np.nextafter(u[i - 1], np.inf)
    return u


class UniformSample:
    """Sorted ``U_1..U_n`` with exact evaluation of E_n, U_n and their integrals."""

    def __init__(self, u):
        u = np.asarray(u, dtype=float).ravel()
        if u.size == 0:
            raise ValueError("empty sample")
        if np.any(~(u > 0)) or np.any(~(u < 1)):
            raise ValueError("uniform sample must lie in (0,1)")
        self.u = _nudge_ties(u)
        self.n = u.size

    def ecdf(self, y):
        return np.searchsorted(self.u, np.asarray(y, dtype=float), side="right") / self.n

    def quantile(self, y):
        y = np.asarray(y, dtype=float)
        return self.u[ceil_index(self.n, y) - 1]

    def integrals(self, t):
        """(int_0^t E_n, int_0^t U_n) at each t in [0, 1]."""
        t = np.ascontiguousarray(np.asarray(t, dtype=float).ravel())
        if np.any(t < 0) or np.any(t > 1):
            raise ValueError("integration limit outside [0,1]")
        return step_integrals(self.u, t)

    def jump_points(self):
        """Jumps of E_n (the U_i) and of U_n (the k/n)."""
        return np.concatenate([self.u, np.arange(1, self.n) / self.n])


def _as_sample(U) -> UniformSample:
    return U if isinstance(U, UniformSample) else UniformSample(U)


def _check_sigma(sigma_n1):
    if not sigma_n1 > 0:
        raise ValueError("sigma_n1 must be positive")
    return float(sigma_n1)


def uniformize(path, marginal: MarginalModel, check: bool = True) -> np.ndarray:
    """``U_i = F(X_i)`` for the path, after checking the marginal fits the model."""
    if check:
        model = path.model
        if isinstance(marginal, GaussianMarginal):
            ok = model.innovations.kind == "standard_normal" and math.isclose(
                marginal.sigma, math.sqrt(model.marginal_variance), rel_tol=1e-9)
            if not ok:
                raise MarginalMismatchError(
                    "Gaussian marginal needs Gaussian innovations and sigma = sd(X_1)")
        elif isinstance(marginal, EmpiricalOracleMarginal):
            if marginal.model is not model and marginal.model.to_dict() != model.to_dict():
                raise MarginalMismatchError("oracle marginal was built for a different model")
        else:
            raise MarginalMismatchError(f"{marginal.family} marginal is not the law of a linear process path")
    u = marginal.cdf(np.asarray(path.x))
    if np.any(~(u > 0)) or np.any(~(u < 1)):
        raise ValueError("uniformized values left (0,1); path too extreme for the marginal")
    return u


# ---------------------------------------------------------------------------
# processes
# ---------------------------------------------------------------------------

def alpha_n(U, y_grid, sigma_n1: float, scaling=None) -> ProcessEvaluation:
    s = _as_sample(U)
    sig = _check_sigma(sigma_n1)
    y = np.asarray(y_grid, dtype=float)
    vals = s.n * (s.ecdf(y) - y) / sig
    return ProcessEvaluation("alpha", y, vals, scaling, sig, s.n)


def u_n(U, y_grid, sigma_n1: float, scaling=None) -> ProcessEvaluation:
    s = _as_sample(U)
    sig = _check_sigma(sigma_n1)
    y = np.asarray(y_grid, dtype=float)
    vals = s.n * (y - s.quantile(y)) / sig
    return ProcessEvaluation("u", y, vals, scaling, sig, s.n)


def beta_n(x_sample, marginal: MarginalModel, x_grid, sigma_n1: float, scaling=None) -> ProcessEvaluation:
    xs = np.sort(np.asarray(x_sample, dtype=float))
    if xs.size == 0:
        raise ValueError("empty sample")
    sig = _check_sigma(sigma_n1)
    x = np.asarray(x_grid, dtype=float)
    fn = np.searchsorted(xs, x, side="right") / xs.size
    vals = xs.size * (fn - marginal.cdf(x)) / sig
    return ProcessEvaluation("beta", x, vals, scaling, sig, xs.size)


def q_n(x_sample, marginal: MarginalModel, y_grid, sigma_n1: float, scaling=None) -> ProcessEvaluation:
    xs = np.sort(np.asarray(x_sample, dtype=float))
    if xs.size == 0:
        raise ValueError("empty sample")
    sig = _check_sigma(sigma_n1)
    y = np.asarray(y_grid, dtype=float)
    qn = xs[ceil_index(xs.size, y) - 1]
    vals = xs.size * (marginal.quantile(y) - qn) / sig
    return ProcessEvaluation("q", y, vals, scaling, sig, xs.size)


def bahadur_kiefer(alpha: ProcessEvaluation, u: ProcessEvaluation) -> ProcessEvaluation:
    _aligned(alpha, u)
    return ProcessEvaluation("bk", alpha.grid, alpha.values - u.values, alpha.scaling, alpha.sigma_n1, alpha.n)


def _int_alpha(s: UniformSample, t, sig):
    """int_0^t alpha_n(y) dy, exact."""
    ie, _ = s.integrals(t)
    return s.n * (ie - 0.5 * t * t) / sig


def vervaat(U, t_grid, sigma_n1: float, scaling=None) -> ProcessEvaluation:
    """2 sigma^-1 n int_0^t (alpha_n - u_n), via the closed-form step integrals."""
    s = _as_sample(U)
    sig = _check_sigma(sigma_n1)
    t = np.asarray(t_grid, dtype=float)
    ie, iu = s.integrals(t)
    n = s.n
    vals = 2.0 * n * n * (ie + iu - t * t) / (sig * sig)
    return ProcessEvaluation("vervaat", t, vals, scaling, sig, n)


def vervaat_error(V: ProcessEvaluation, alpha: ProcessEvaluation) -> ProcessEvaluation:
    _aligned(V, alpha)
    return ProcessEvaluation("vervaat_error", V.grid, V.values - alpha.values**2, V.scaling, V.sigma_n1, V.n)


def a_n_functional(U, t_grid, sigma_n1: float, scaling=None) -> ProcessEvaluation:
    """2 sigma^-1 n int_{U_n(t)}^t (alpha_n(y) - alpha_n(t)) dy, exact (signed orientation)."""
    s = _as_sample(U)
    sig = _check_sigma(sigma_n1)
    t = np.asarray(t_grid, dtype=float)
    un = s.quantile(t)
    a_t = s.n * (s.ecdf(t) - t) / sig
    vals = 2.0 * s.n / sig * (_int_alpha(s, t, sig) - _int_alpha(s, un, sig) - (t - un) * a_t)
    return ProcessEvaluation("a_n", t, vals, scaling, sig, s.n)


# ---------------------------------------------------------------------------
# exact sup grids and sup statistics
# ---------------------------------------------------------------------------

def sup_grid(s: UniformSample, lo: float, hi: float, refine: int = 4096) -> np.ndarray:
    """Window endpoints, every jump point inside with both one-sided neighbours, plus a uniform refinement."""
    lo = max(lo, Y_MIN)
    hi = min(hi, Y_MAX)
    if not lo < hi:
        return np.array([], dtype=float)
    jp = s.jump_points()
    jp = jp[(jp >= lo) & (jp <= hi)]
    pts = np.concatenate([
        [lo, hi], jp, np.nextafter(jp, -np.inf), np.nextafter(jp, np.inf),
        np.linspace(lo, hi, refine),
    ])
    pts = pts[(pts >= lo) & (pts <= hi)]
    return np.unique(pts)


def bk_residual(s: UniformSample, y, sigma_n1: float, sum_x: float, profile):
    """n sigma^-1 R_n(y) - sigma^-2 f'(Q(y)) (sum X)^2."""
    n = s.n
    rt = (n * s.ecdf(y) + n * s.quantile(y) - 2.0 * n * y) / sigma_n1
    return n * rt / sigma_n1 - profile.fprimeQ(y) * (sum_x / sigma_n1) ** 2


def bk_window_sup(s: UniformSample, delta: float, sigma_n1: float, sum_x: float, profile) -> float:
    y = sup_grid(s, delta, 1.0 - delta)
    if y.size == 0:
        return math.nan
    return float(np.max(np.abs(bk_residual(s, y, sigma_n1, sum_x, profile))))


def reduction_sup(s: UniformSample, sigma_n1: float, y1: float, y2: float, profile, y2_sign: float = 1.0) -> float:
    """sup_y |alpha_n(y) + sigma^-1 (fQ(y) Y1 - sign * f'Q(y) Y2)|."""
    y = sup_grid(s, Y_MIN, Y_MAX)
    a = s.n * (s.ecdf(y) - y) / sigma_n1
    r = a + (profile.fQ(y) * y1 - y2_sign * profile.fprimeQ(y) * y2) / sigma_n1
    return float(np.max(np.abs(r)))


def quantile_sups(s: UniformSample, sigma_n1: float, sum_x: float, profile):
    """(sup |u_n + sigma^-1 fQ sum X|, sup |u_n|) over (0, 1)."""
    y = sup_grid(s, Y_MIN, Y_MAX)
    un = s.n * (y - s.quantile(y)) / sigma_n1
    approx = float(np.max(np.abs(un + profile.fQ(y) * sum_x / sigma_n1)))
    # u_n is affine between the k/n, so its sup sits at a one-sided limit there; the grid holds both
    return approx, float(np.max(np.abs(un)))
