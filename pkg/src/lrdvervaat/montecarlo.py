"""Replication harness and statistical verdicts for the limit theorems.

A run draws ``R`` independent paths for every ``n`` in the ladder, computes
the statistics each requested theorem needs and stores them in a long table
(``theorem, n, r, location, statistic, value, seed``). Verdicts are pure
functions of that table and the config, so they can be recomputed from the
CSV alone.

Seeds: row ``(n, r)`` uses ``SeedSequence([master_seed, n, r])``, so the
table does not depend on execution order or on the number of workers.
"""

from __future__ import annotations

import concurrent.futures as cf
import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import asymptotics as asy
from .marginals import GaussianMarginal, MarginalModel, density_quantile_profile
from .model import CoefficientSpec, LinearProcessModel, compute_y2, simulate_path
from .processes import (
    UniformSample,
    bk_residual,
    quantile_sups,
    reduction_sup,
    sup_grid,
    uniformize,
)

log = logging.getLogger(__name__)

THEOREMS = ("thm11", "cor12", "thm13", "thm14", "reduction22", "lil", "cor25", "clt")
#: theorems whose hypotheses include beta < 3/4
_NEEDS_SHORT_BETA = ("thm11", "cor12", "thm13", "thm14")
DEFAULT_LOCATIONS = {
    "cor12": (0.2, 0.35, 0.65, 0.8),
    "thm13": (0.2, 0.35, 0.5, 0.65, 0.8),
    "thm14": (0.2, 0.35, 0.65, 0.8),
}
CSV_COLUMNS = ("theorem", "n", "r", "location", "statistic", "value", "seed")


def default_threads() -> int:
    env = os.environ.get("THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def lrd_model(beta: float, n_max: int, truncation_factor: int = 16) -> LinearProcessModel:
    """Gaussian-innovation model with L0 = 1 and M = truncation_factor * n_max."""
    return LinearProcessModel(CoefficientSpec(beta, truncation_m=truncation_factor * int(n_max)))


@dataclass
class ExperimentConfig:
    model: LinearProcessModel
    theorems: tuple = ("thm13",)
    n_list: tuple = (2**12, 2**14, 2**16)
    R: int = 200
    locations: dict = field(default_factory=dict)
    master_seed: int = 12345
    marginal: MarginalModel | None = None
    ks_alpha: float = 0.01
    trend_factor: float = 1.5
    location_fraction: float = 0.8
    bounded_factor: float = 3.0
    sign_flip_factor: float = 2.0
    C_delta: float = 1.0
    C_delta_list: tuple = (0.5, 1.0, 2.0)
    thm14_prefactor: float | None = None
    min_success: float = 0.9
    threads: int | None = None

    def __post_init__(self):
        if isinstance(self.theorems, str):
            self.theorems = (self.theorems,)
        self.theorems = tuple(self.theorems)
        for th in self.theorems:
            if th not in THEOREMS:
                raise ValueError(f"unknown theorem {th!r}")
        if "lil" in self.theorems and len(self.theorems) > 1:
            raise ValueError("lil runs one long path per replication; run it on its own")
        self.n_list = tuple(sorted(int(n) for n in self.n_list))
        if not self.n_list or self.n_list[0] < 16:
            raise ValueError("n_list must be non-empty with every n >= 16")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        locs = {}
        for th in self.theorems:
            pts = tuple(float(v) for v in self.locations.get(th, DEFAULT_LOCATIONS.get(th, ())))
            if any(not 0 < v < 1 for v in pts):
                raise ValueError(f"{th} locations must be interior to (0,1)")
            locs[th] = pts
        self.locations = locs
        if self.C_delta not in self.C_delta_list:
            self.C_delta_list = tuple(sorted(set(self.C_delta_list) | {self.C_delta}))
        if self.marginal is None:
            if self.model.innovations.kind != "standard_normal":
                raise ValueError("non-Gaussian innovations need an explicit marginal (e.g. the empirical oracle)")
            self.marginal = GaussianMarginal(math.sqrt(self.model.marginal_variance))
        if self.model.truncation_m + self.n_list[-1] > 2**28:
            raise ValueError("truncation plus path length too large to simulate")

    @property
    def beta(self):
        return self.model.beta

    def out_of_hypothesis(self, theorem: str) -> list:
        """Reasons the configuration violates the theorem's hypotheses (empty if none)."""
        why = []
        if self.beta is None:
            why.append("model has no long-memory coefficient family (white noise / explicit array)")
        elif theorem in _NEEDS_SHORT_BETA and self.beta >= 0.75:
            why.append(f"beta = {self.beta} violates beta < 3/4")
        return why

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(), "marginal": self.marginal.to_dict(),
            "theorems": list(self.theorems), "n_list": list(self.n_list), "R": self.R,
            "locations": {k: list(v) for k, v in self.locations.items()},
            "master_seed": self.master_seed, "ks_alpha": self.ks_alpha,
            "trend_factor": self.trend_factor, "location_fraction": self.location_fraction,
            "bounded_factor": self.bounded_factor, "sign_flip_factor": self.sign_flip_factor,
            "C_delta": self.C_delta, "C_delta_list": list(self.C_delta_list),
            "thm14_prefactor": self.thm14_prefactor, "min_success": self.min_success,
        }


def row_seed(master_seed: int, n: int, r: int) -> int:
    state = np.random.SeedSequence([int(master_seed), int(n), int(r)]).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


# ---------------------------------------------------------------------------
# shared read-only context
# ---------------------------------------------------------------------------

class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        model = cfg.model
        n_max = cfg.n_list[-1]
        self.cov = asy.autocovariances(model.c, model.innovations.variance, n_max)
        self.profile = density_quantile_profile(cfg.marginal)
        self.sigma = {n: asy.sigma_n1_exact(self.cov, n) for n in cfg.n_list}
        spec = model.spec
        self.scaling = {}
        self.delta = {}
        if spec is not None:
            for n in cfg.n_list:
                self.scaling[n] = asy.sigma_constants(self.cov, spec, n, cfg.C_delta)
                for c in cfg.C_delta_list:
                    self.delta[n, c] = asy.rate_schedule(spec, n, c)[0]
        if "lil" in cfg.theorems:
            self.lil_sigma = np.array([asy.sigma_n1_exact(self.cov, k) for k in cfg.n_list])


def _window_delta(ctx: _Context, n: int, c: float) -> float:
    if (n, c) in ctx.delta:
        return ctx.delta[n, c]
    # white-noise fallback: the window with beta -> 1 scaling is meaningless; use the n**-1/2 scale
    return c * n**-0.5 * math.log(math.log(n))


def _replicate(ctx: _Context, n: int, r: int, seed: int) -> list:
    cfg = ctx.cfg
    model = cfg.model
    rows = []
    n_path = cfg.n_list[-1] if cfg.theorems == ("lil",) else n
    path = simulate_path(model, n_path, seed)
    x = np.asarray(path.x)
    sig = ctx.sigma[n] if n in ctx.sigma else None
    sum_x = math.fsum(x[:n])
    need_u = any(th in cfg.theorems for th in ("thm11", "cor12", "thm13", "thm14", "reduction22", "cor25"))
    s = UniformSample(uniformize(path, cfg.marginal)) if need_u else None
    prof = ctx.profile
    for th in cfg.theorems:
        if th == "clt":
            rows.append((th, None, "z", sum_x / sig))
        elif th == "thm11":
            deltas = {c: _window_delta(ctx, n, c) for c in cfg.C_delta_list}
            lo = min(deltas.values())
            y = sup_grid(s, lo, 1.0 - lo)
            y = np.unique(np.concatenate([y, [d for d in deltas.values() if d < 0.5],
                                          [1.0 - d for d in deltas.values() if d < 0.5]]))
            res = np.abs(bk_residual(s, y, sig, sum_x, prof)) if y.size else np.array([])
            for c, d in deltas.items():
                inside = (y >= d) & (y <= 1.0 - d)
                val = float(res[inside].max()) if np.any(inside) else math.nan
                rows.append((th, c, "bk_sup", val))
        elif th == "cor12":
            locs = np.array(cfg.locations[th])
            d = _window_delta(ctx, n, cfg.C_delta)
            rt = (n * s.ecdf(locs) + n * s.quantile(locs) - 2.0 * n * locs) / sig
            vals = np.where((locs >= d) & (locs <= 1 - d), n * rt / sig, 0.0)
            rows.extend((th, float(t), "nR", float(v)) for t, v in zip(locs, vals))
        elif th in ("thm13", "thm14"):
            t = np.array(cfg.locations[th])
            ie, iu = s.integrals(t)
            v = 2.0 * n * n * (ie + iu - t * t) / (sig * sig)
            if th == "thm13":
                rows.extend((th, float(a), "V", float(b)) for a, b in zip(t, v))
            else:
                alpha = n * (s.ecdf(t) - t) / sig
                w = n * (v - alpha**2) / sig
                rows.extend((th, float(a), "nW", float(b)) for a, b in zip(t, w))
        elif th == "reduction22":
            forms = compute_y2(path)
            rows.append((th, None, "red_sup", reduction_sup(s, sig, forms.y1, forms.y2, prof, 1.0)))
            rows.append((th, None, "red_sup_flip", reduction_sup(s, sig, forms.y1, forms.y2, prof, -1.0)))
        elif th == "cor25":
            approx, raw = quantile_sups(s, sig, sum_x, prof)
            rows.append((th, None, "u_approx_sup", approx))
            rows.append((th, None, "u_sup", raw))
        elif th == "lil":
            ks = np.array(cfg.n_list)
            partial = np.cumsum(x)[ks - 1]
            lln = np.sqrt(np.log(np.log(ks)))
            stat = np.abs(partial) / (ctx.lil_sigma * lln)
            rows.extend((th, int(k), "lil", float(v)) for k, v in zip(ks, stat))
            if model.beta is not None:
                wrng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, n, r, 1]))
                white = np.cumsum(wrng.standard_normal(ks[-1]))[ks - 1]
                wstat = np.abs(white) / (ctx.lil_sigma * lln)
                rows.extend((th, int(k), "lil_white", float(v)) for k, v in zip(ks, wstat))
    return rows


# ---------------------------------------------------------------------------
# replication table
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class ReplicationTable:
    rows: list
    config: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def __post_init__(self):
        self._index = None

    def _build(self):
        idx = {}
        for th, n, r, loc, stat, val, seed in self.rows:
            key = (stat, int(n), None if loc in (None, "") else float(loc))
            idx.setdefault(key, []).append((int(r), float(val)))
        self._index = {k: np.array([v for _, v in sorted(lst)]) for k, lst in idx.items()}

    def values(self, statistic: str, n: int, location=None) -> np.ndarray:
        if self._index is None:
            self._build()
        key = (statistic, int(n), None if location is None else float(location))
        return self._index.get(key, np.array([]))

    def locations(self, statistic: str, n: int) -> list:
        if self._index is None:
            self._build()
        return sorted(k[2] for k in self._index if k[0] == statistic and k[1] == n and k[2] is not None)

    def success_fraction(self, n: int, R: int) -> float:
        failed = {r for (nn, r, _msg) in self.failures if nn == n}
        return 1.0 - len(failed) / R

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for th, n, r, loc, stat, val, seed in self.rows:
            w.writerow([th, int(n), int(r), _fmt(loc), stat, _fmt(val), int(seed)])
        text = buf.getvalue()
        if target is not None:
            with open(target, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> ReplicationTable:
        with open(source, encoding="ascii", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != CSV_COLUMNS:
                raise ValueError(f"unexpected CSV header {header}")
            rows, failures = [], []
            for th, n, r, loc, stat, val, seed in reader:
                loc_v = None if loc == "" else float(loc)
                rows.append((th, int(n), int(r), loc_v, stat, float(val), int(seed)))
                if stat == "error":
                    failures.append((int(n), int(r), "recorded failure"))
        return cls(rows, {}, failures)


def run_replications(cfg: ExperimentConfig, threads: int | None = None) -> ReplicationTable:
    """Simulate ``R`` paths per n and collect every statistic the configured theorems need."""
    ctx = _Context(cfg)
    threads = threads or cfg.threads or default_threads()
    ns = (cfg.n_list[-1],) if cfg.theorems == ("lil",) else cfg.n_list
    tasks = [(n, r, row_seed(cfg.master_seed, n, r)) for n in ns for r in range(cfg.R)]

    def work(task):
        n, r, seed = task
        try:
            return task, _replicate(ctx, n, r, seed), None
        except Exception as exc:  # recorded, not fatal
            log.warning("replication n=%d r=%d failed: %s", n, r, exc)
            return task, [], f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with cf.ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]

    rows, failures = [], []
    for (n, r, seed), out, err in results:
        if err is not None:
            failures.append((n, r, err))
            rows.append((cfg.theorems[0], n, r, None, "error", math.nan, seed))
            continue
        for th, loc, stat, val in out:
            rows.append((th, n, r, loc, stat, val, seed))
    return ReplicationTable(rows, cfg.to_dict(), failures)


# ---------------------------------------------------------------------------
# verdicts
# ---------------------------------------------------------------------------

@dataclass
class TheoremVerdict:
    theorem: str
    passed: bool
    out_of_hypothesis: bool
    hypothesis_notes: list
    criteria: dict
    per_n: dict
    notes: list
    scaling: list
    config: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=kw.pop("indent", 2), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _scaling_list(cfg: ExperimentConfig) -> list:
    spec = cfg.model.spec
    if spec is None:
        return []
    cov = asy.autocovariances(cfg.model.c, cfg.model.innovations.variance, cfg.n_list[-1])
    return [asy.sigma_constants(cov, spec, n, cfg.C_delta).to_dict() for n in cfg.n_list]


def _base(cfg: ExperimentConfig, table: ReplicationTable, theorem: str, scaling=None):
    why = cfg.out_of_hypothesis(theorem)
    notes = []
    ok = True
    ns = (cfg.n_list[-1],) if theorem == "lil" else cfg.n_list
    for n in ns:
        frac = table.success_fraction(n, cfg.R)
        if frac < cfg.min_success:
            ok = False
            notes.append(f"n={n}: only {frac:.0%} of replications succeeded")
    return why, notes, ok, (_scaling_list(cfg) if scaling is None else scaling)


def _finite(v):
    v = np.asarray(v, dtype=float)
    return v[np.isfinite(v)]


def verdict_thm11(table: ReplicationTable, cfg: ExperimentConfig, scaling=None) -> TheoremVerdict:
    why, notes, ok, sc = _base(cfg, table, "thm11", scaling)
    per_n, medians = {}, {}
    for c in cfg.C_delta_list:
        med = []
        for n in cfg.n_list:
            v = _finite(table.values("bk_sup", n, c))
            entry = per_n.setdefault(n, {})
            entry[f"C={c}"] = {"median": float(np.median(v)) if v.size else None,
                               "p90": float(np.quantile(v, 0.9)) if v.size else None,
                               "count": int(v.size)}
            med.append(float(np.median(v)) if v.size else math.nan)
        medians[c] = med
    m = medians[cfg.C_delta]
    span = cfg.n_list[-1] / cfg.n_list[0]
    monotone = all(a > b for a, b in zip(m, m[1:]))
    factor = m[0] / m[-1] if m[-1] > 0 else math.inf
    if span < 16:
        notes.append(f"n ladder spans only {span:g}x (need >= 16x)")
    passed = ok and span >= 16 and monotone and factor >= cfg.trend_factor
    crit = {"C_delta": cfg.C_delta, "medians": m, "monotone_decrease": monotone,
            "total_factor": factor, "trend_factor": cfg.trend_factor,
            "sensitivity": {f"C={c}": {"medians": medians[c],
                                        "total_factor": medians[c][0] / medians[c][-1]}
                            for c in cfg.C_delta_list}}
    return TheoremVerdict("thm11", bool(passed), bool(why), why, crit, per_n, notes, sc, cfg.to_dict())


def theorem_limit_law(cfg: ExperimentConfig, theorem: str, scale_factor: float = 1.0) -> asy.LimitLaw:
    prof = density_quantile_profile(cfg.marginal)
    pref = cfg.thm14_prefactor
    law = asy.limit_law(theorem, prof, cfg.beta, prefactor=pref)
    if scale_factor != 1.0:
        base = law.scale
        return asy.LimitLaw(law.kind, lambda loc: scale_factor * base(loc))
    return law


_STAT = {"cor12": "nR", "thm13": "V", "thm14": "nW", "clt": "z"}


def ks_test(sample, cdf):
    """Two-sided one-sample KS statistic and exact/asymptotic p-value (scipy)."""
    res = stats.kstest(np.asarray(sample, dtype=float), cdf)
    return float(res.statistic), float(res.pvalue)


def verdict_distributional(table: ReplicationTable, cfg: ExperimentConfig, theorem: str,
                           scale_factor: float = 1.0, location_fraction: float | None = None,
                           scaling=None) -> TheoremVerdict:
    """KS comparison of each location's replications with the exact limit CDF.

    Pass iff the KS p-value at the largest n exceeds ``ks_alpha`` at a
    fraction >= ``location_fraction`` of the usable locations and the mean KS
    distance at the largest n is below the one at the smallest n.
    """
    why, notes, ok, sc = _base(cfg, table, theorem, scaling)
    frac_needed = cfg.location_fraction if location_fraction is None else location_fraction
    law = theorem_limit_law(cfg, theorem, scale_factor)
    stat = _STAT[theorem]
    locs = [None] if theorem == "clt" else list(cfg.locations[theorem])
    per_n = {n: {} for n in cfg.n_list}
    usable, passes = [], 0
    for loc in locs:
        key = "all" if loc is None else repr(loc)
        try:
            cdf = law.cdf_function(loc)
            scale = law.scale_at(loc)
        except asy.DegenerateLimitError:
            notes.append(f"location {loc}: degenerate limit (zero scale), skipped")
            continue
        usable.append(loc)
        for n in cfg.n_list:
            v = _finite(table.values(stat, n, loc))
            if v.size == 0:
                per_n[n][key] = {"ks_distance": None, "p_value": None, "count": 0, "scale": scale}
                continue
            d, p = ks_test(v, cdf)
            per_n[n][key] = {"ks_distance": d, "p_value": p, "count": int(v.size), "scale": scale,
                             "median": float(np.median(v))}
        top = per_n[cfg.n_list[-1]][key]
        if top["p_value"] is not None and top["p_value"] > cfg.ks_alpha:
            passes += 1

    def mean_d(n):
        ds = [per_n[n][("all" if l is None else repr(l))]["ks_distance"] for l in usable]
        ds = [d for d in ds if d is not None]
        return float(np.mean(ds)) if ds else math.nan

    frac = passes / len(usable) if usable else 0.0
    d_small, d_big = mean_d(cfg.n_list[0]), mean_d(cfg.n_list[-1])
    if theorem == "clt" or len(cfg.n_list) == 1:
        trend = True
        if len(cfg.n_list) == 1 and theorem != "clt":
            notes.append("single n: KS-distance trend not checked")
    else:
        trend = d_big < d_small
    passed = ok and bool(usable) and frac >= frac_needed and trend
    crit = {"ks_alpha": cfg.ks_alpha, "locations_used": usable, "fraction_passing": frac,
            "fraction_needed": frac_needed, "mean_ks_smallest_n": d_small, "mean_ks_largest_n": d_big,
            "ks_distance_decreases": trend, "limit_scale_factor": scale_factor}
    if theorem == "thm14":
        crit["prefactor"] = asy.vervaat_error_prefactor(cfg.beta) if cfg.thm14_prefactor is None \
            else cfg.thm14_prefactor
    return TheoremVerdict(theorem, bool(passed), bool(why), why, crit, per_n, notes, sc, cfg.to_dict())


def verdict_cor12(table, cfg, **kw):
    return verdict_distributional(table, cfg, "cor12", **kw)


def verdict_thm13(table, cfg, **kw):
    return verdict_distributional(table, cfg, "thm13", **kw)


def verdict_thm14(table, cfg, **kw):
    return verdict_distributional(table, cfg, "thm14", **kw)


def verdict_clt(table, cfg, **kw):
    return verdict_distributional(table, cfg, "clt", **kw)


def _bounded(ratios, factor):
    r = [v for v in ratios if v is not None and math.isfinite(v) and v > 0]
    if len(r) < len(ratios) or not r:
        return False, math.inf
    spread = max(r) / min(r)
    return spread <= factor, spread


def verdict_reduction22(table: ReplicationTable, cfg: ExperimentConfig, scaling=None) -> TheoremVerdict:
    why, notes, ok, sc = _base(cfg, table, "reduction22", scaling)
    spec = cfg.model.spec
    per_n, ratios = {}, []
    for n in cfg.n_list:
        v = _finite(table.values("red_sup", n))
        vf = _finite(table.values("red_sup_flip", n))
        med = float(np.median(v)) if v.size else math.nan
        medf = float(np.median(vf)) if vf.size else math.nan
        d = asy.rate_schedule(spec, n, cfg.C_delta)[2] if spec is not None else math.nan
        ratios.append(med / d)
        per_n[n] = {"median": med, "median_flipped": medf, "d_n2": d, "median_over_d": med / d,
                    "flip_inflation": medf / med if med > 0 else math.nan}
    bounded, spread = _bounded(ratios, cfg.bounded_factor)
    flip = per_n[cfg.n_list[-1]]["flip_inflation"]
    flip_ok = bool(flip >= cfg.sign_flip_factor)
    passed = ok and bounded and flip_ok
    crit = {"bounded_factor": cfg.bounded_factor, "spread": spread, "bounded": bounded,
            "sign_flip_factor": cfg.sign_flip_factor, "flip_inflation_largest_n": flip,
            "flip_inflates": flip_ok}
    return TheoremVerdict("reduction22", bool(passed), bool(why), why, crit, per_n, notes, sc, cfg.to_dict())


def verdict_cor25(table: ReplicationTable, cfg: ExperimentConfig, scaling=None) -> TheoremVerdict:
    why, notes, ok, sc = _base(cfg, table, "cor25", scaling)
    spec = cfg.model.spec
    per_n, r1, r2 = {}, [], []
    for n in cfg.n_list:
        a = _finite(table.values("u_approx_sup", n))
        b = _finite(table.values("u_sup", n))
        lln, ln = math.log(math.log(n)), math.log(n)
        a_n = asy.rate_schedule(spec, n, cfg.C_delta)[1] if spec is not None else math.nan
        env1 = a_n * math.sqrt(lln) * math.sqrt(ln)
        env2 = math.sqrt(lln)
        m1 = float(np.median(a)) if a.size else math.nan
        m2 = float(np.median(b)) if b.size else math.nan
        r1.append(m1 / env1)
        r2.append(m2 / env2)
        per_n[n] = {"approx_median": m1, "approx_envelope": env1, "approx_ratio": m1 / env1,
                    "sup_median": m2, "sup_envelope": env2, "sup_ratio": m2 / env2}
    b1, s1 = _bounded(r1, cfg.bounded_factor)
    b2, s2 = _bounded(r2, cfg.bounded_factor)
    passed = ok and b1 and b2
    crit = {"bounded_factor": cfg.bounded_factor, "approx_spread": s1, "approx_bounded": b1,
            "sup_spread": s2, "sup_bounded": b2}
    return TheoremVerdict("cor25", bool(passed), bool(why), why, crit, per_n, notes, sc, cfg.to_dict())


def verdict_lil(table: ReplicationTable, cfg: ExperimentConfig, scaling=None) -> TheoremVerdict:
    """Running max of |S_k| / (sigma_k sqrt(log log k)) over the checkpoints ``n_list``.

    Pass iff the median (over replications) of the final running max lies in
    [0.3 c, 1.7 c] with c = lil_constant(beta).
    """
    why, notes, ok, sc = _base(cfg, table, "lil", scaling)
    n_path = cfg.n_list[-1]
    ks = cfg.n_list
    mat = np.array([table.values("lil", n_path, k) for k in ks])
    white = np.array([table.values("lil_white", n_path, k) for k in ks]) if cfg.beta is not None else None
    per_n = {}
    if mat.size == 0 or cfg.beta is None:
        crit = {"note": "no long-memory constant available"}
        return TheoremVerdict("lil", False, bool(why), why, crit, per_n, notes, sc, cfg.to_dict())
    c = asy.lil_constant(cfg.beta)
    running = np.maximum.accumulate(mat, axis=0)
    final = float(np.median(running[-1]))
    for i, k in enumerate(ks):
        per_n[int(k)] = {"median_statistic": float(np.median(mat[i])),
                         "median_running_max": float(np.median(running[i]))}
        if white is not None and white.size:
            per_n[int(k)]["median_white_noise"] = float(np.median(white[i]))
    in_band = 0.3 * c <= final <= 1.7 * c
    crit = {"lil_constant": c, "band": [0.3 * c, 1.7 * c], "final_running_max_median": final,
            "in_band": bool(in_band)}
    if white is not None and white.size:
        wfinal = float(np.median(white[-1]))
        crit["white_noise_final_median"] = wfinal
        crit["white_noise_collapses"] = bool(wfinal < 0.3 * c and white[-1].mean() < white[0].mean())
    passed = ok and in_band
    return TheoremVerdict("lil", bool(passed), bool(why), why, crit, per_n, notes, sc, cfg.to_dict())


VERDICTS = {
    "thm11": verdict_thm11, "cor12": verdict_cor12, "thm13": verdict_thm13, "thm14": verdict_thm14,
    "reduction22": verdict_reduction22, "lil": verdict_lil, "cor25": verdict_cor25, "clt": verdict_clt,
}


def verdict(theorem: str, table: ReplicationTable, cfg: ExperimentConfig, **kw) -> TheoremVerdict:
    return VERDICTS[theorem](table, cfg, **kw)


# ---------------------------------------------------------------------------
# plot data
# ---------------------------------------------------------------------------

def residual_curve_csv(v: TheoremVerdict) -> str:
    """Per-n summary rows (n, key, field, value) of a verdict, for external plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "key", "field", "value"])
    for n, entry in v.per_n.items():
        for key, val in entry.items():
            if isinstance(val, dict):
                for f, x in val.items():
                    if isinstance(x, (int, float)) and not isinstance(x, bool):
                        w.writerow([n, key, f, repr(float(x))])
            elif isinstance(val, (int, float)) and not isinstance(val, bool):
                w.writerow([n, "", key, repr(float(val))])
    return buf.getvalue()


def ecdf_curve_csv(table: ReplicationTable, cfg: ExperimentConfig, theorem: str, points: int = 101) -> str:
    """ECDF of the largest-n replications against the limit CDF at each location."""
    law = theorem_limit_law(cfg, theorem)
    stat = _STAT[theorem]
    n = cfg.n_list[-1]
    locs = [None] if theorem == "clt" else cfg.locations[theorem]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["location", "w", "ecdf", "limit_cdf"])
    for loc in locs:
        try:
            cdf = law.cdf_function(loc)
        except asy.DegenerateLimitError:
            continue
        v = np.sort(_finite(table.values(stat, n, loc)))
        if v.size == 0:
            continue
        grid = np.quantile(v, np.linspace(0, 1, points))
        ecdf = np.searchsorted(v, grid, side="right") / v.size
        for g, e, f in zip(grid, ecdf, cdf(grid)):
            w.writerow([_fmt(loc), repr(float(g)), repr(float(e)), repr(float(f))])
    return buf.getvalue()
