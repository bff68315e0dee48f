"""Command-line entry point: simulate, verify, check-conditions, constants.

Exit codes: 0 success / verdict passed, 1 verdict failed, 2 bad config or
arguments, 3 model invariant violated, 4 configuration outside the
theorem's hypotheses.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import subprocess
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from . import asymptotics as asy
from . import montecarlo as mc
from .config import ConfigError, load_config, merged
from .marginals import check_condition, gaussian, pareto_tail
from .model import CoefficientSpec, InnovationLaw, LinearProcessModel, ModelError, SlowlyVarying, simulate_path

log = logging.getLogger("lrdvervaat")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INVARIANT, EXIT_HYPOTHESIS = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def version_string() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, timeout=5, cwd=Path(__file__).resolve().parent)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    master_seed: int | None
    started: str
    finished: str | None = None
    outputs: dict = field(default_factory=dict)
    checksums: dict = field(default_factory=dict)
    exit_code: int | None = None

    def write(self, path: Path):
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="ascii")

    def finish(self, path: Path, exit_code: int):
        self.finished = _now()
        self.exit_code = exit_code
        self.checksums = {k: _sha256(Path(p)) for k, p in self.outputs.items() if Path(p).exists()}
        self.write(path)


# ---------------------------------------------------------------------------
# model construction from flags + file
# ---------------------------------------------------------------------------

def _model_from(args, cfg: dict, n_max: int) -> LinearProcessModel:
    beta = merged(cfg, "lrd_model", "beta", args.beta)
    if beta is None:
        raise UsageError("missing required field: beta (--beta or [lrd_model] beta)")
    sv = merged(cfg, "lrd_model", "slowly_varying", getattr(args, "slowly_varying", None), "constant")
    sv_val = merged(cfg, "lrd_model", "slowly_varying_value", getattr(args, "slowly_varying_value", None))
    if sv == "constant":
        L0 = SlowlyVarying.constant(1.0 if sv_val is None else sv_val)
    elif sv == "log_power":
        L0 = SlowlyVarying.log_power(0.0 if sv_val is None else sv_val)
    else:
        raise UsageError(f"field slowly_varying: unknown kind {sv!r}")
    m = merged(cfg, "lrd_model", "truncation_m", getattr(args, "truncation_m", None))
    if m is None:
        factor = merged(cfg, "lrd_model", "truncation_factor", getattr(args, "truncation_factor", None), 16)
        m = int(factor) * int(n_max)
    law = InnovationLaw(merged(cfg, "lrd_model", "innovations", getattr(args, "innovations", None),
                               "standard_normal"),
                        merged(cfg, "lrd_model", "variance", None, 1.0))
    return LinearProcessModel(CoefficientSpec(float(beta), L0, truncation_m=int(m)), law)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args, cfg) -> int:
    n = merged(cfg, "lrd_model", "n", args.n)
    if n is None:
        raise UsageError("missing required field: n (--n or [lrd_model] n)")
    seed = merged(cfg, "lrd_model", "seed", args.seed, 0)
    model = _model_from(args, cfg, n)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    man_path = out.with_name(out.name + ".manifest.json")
    summary_path = out.with_name(out.name + ".summary.json")
    manifest = RunManifest("simulate", {"model": model.to_dict(), "n": n, "seed": seed}, version_string(),
                           seed, _now(), outputs={"path_csv": str(out), "summary": str(summary_path)})
    manifest.write(man_path)
    path = simulate_path(model, n, seed)
    with open(out, "w", encoding="ascii", newline="") as fh:
        fh.write("i,x\n")
        fh.writelines(f"{i},{v!r}\n" for i, v in enumerate(path.x.tolist()))
    x = path.x
    summary = {"n": n, "seed": seed, "model": model.to_dict(), "marginal_variance": model.marginal_variance,
               "sample_mean": float(x.mean()), "sample_variance": float(x.var()),
               "sum_x": math.fsum(x)}
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="ascii")
    manifest.finish(man_path, EXIT_OK)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _experiment(args, cfg) -> mc.ExperimentConfig:
    theorem = merged(cfg, "montecarlo", "theorem", args.theorem)
    if theorem is None:
        raise UsageError("missing required field: theorem (--theorem or [montecarlo] theorem)")
    n_list = merged(cfg, "montecarlo", "n_list", args.n_list, (2**12, 2**14, 2**16))
    if theorem == "lil" and args.n_list is None and "n_list" not in cfg.get("montecarlo", {}):
        n_list = tuple(2**k for k in range(4, 21))
    model = _model_from(args, cfg, max(n_list))
    kw = {}
    locs = merged(cfg, "montecarlo", "locations", args.locations)
    if locs is not None:
        kw["locations"] = {theorem: locs}
    for key, flag in [("ks_alpha", args.ks_alpha), ("trend_factor", args.trend_factor),
                      ("location_fraction", args.location_fraction), ("C_delta", args.C_delta),
                      ("thm14_prefactor", args.prefactor), ("bounded_factor", None),
                      ("sign_flip_factor", None)]:
        v = merged(cfg, "montecarlo", key, flag)
        if v is not None:
            kw[key] = v
    return mc.ExperimentConfig(
        model=model, theorems=(theorem,), n_list=n_list,
        R=merged(cfg, "montecarlo", "R", args.R, 200),
        master_seed=merged(cfg, "montecarlo", "master_seed", args.seed, 12345),
        threads=merged(cfg, "montecarlo", "threads", args.threads), **kw)


def cmd_verify(args, cfg) -> int:
    exp = _experiment(args, cfg)
    theorem = exp.theorems[0]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = out / f"{theorem}_raw.csv"
    vpath = out / f"{theorem}_verdict.json"
    man_path = out / f"{theorem}_manifest.json"
    manifest = RunManifest("verify", exp.to_dict(), version_string(), exp.master_seed, _now(),
                           outputs={"raw_csv": str(raw), "verdict": str(vpath)})
    manifest.write(man_path)
    why = exp.out_of_hypothesis(theorem)
    if why and not args.force:
        payload = {"theorem": theorem, "passed": False, "out_of_hypothesis": True, "hypothesis_notes": why,
                   "notes": ["not run; pass --force to run outside the hypotheses"], "config": exp.to_dict()}
        vpath.write_text(json.dumps(payload, indent=2) + "\n", encoding="ascii")
        manifest.outputs = {"verdict": str(vpath)}
        manifest.finish(man_path, EXIT_HYPOTHESIS)
        print(json.dumps(payload, indent=2))
        return EXIT_HYPOTHESIS
    table = mc.run_replications(exp)
    table.to_csv(raw)
    verdict = mc.verdict(theorem, table, exp)
    vpath.write_text(verdict.to_json() + "\n", encoding="ascii")
    curve = out / f"{theorem}_residual_vs_n.csv"
    curve.write_text(mc.residual_curve_csv(verdict), encoding="ascii")
    manifest.outputs["residual_vs_n"] = str(curve)
    if theorem in ("cor12", "thm13", "thm14", "clt"):
        ecdf = out / f"{theorem}_ecdf_vs_limit.csv"
        ecdf.write_text(mc.ecdf_curve_csv(table, exp, theorem), encoding="ascii")
        manifest.outputs["ecdf_vs_limit"] = str(ecdf)
    code = EXIT_HYPOTHESIS if verdict.out_of_hypothesis else (EXIT_OK if verdict.passed else EXIT_FAIL)
    manifest.finish(man_path, code)
    print(verdict.to_json())
    return code


def cmd_check_conditions(args, cfg) -> int:
    family = merged(cfg, "marginals", "family", args.family, "gaussian")
    if family == "gaussian":
        marg = gaussian(merged(cfg, "marginals", "sigma", args.sigma, 1.0))
    elif family in ("pareto", "pareto_tail"):
        marg = pareto_tail(merged(cfg, "marginals", "alpha", args.alpha, 4.0),
                           merged(cfg, "marginals", "delta", args.delta, 1.0))
    else:
        raise UsageError(f"field family: unknown marginal family {family!r}")
    mu = merged(cfg, "marginals", "mu", args.mu)
    cond = merged(cfg, "marginals", "condition", args.condition)
    conds = [cond] if cond else ["A", "B", "C"]
    levels = merged(cfg, "marginals", "levels", args.levels, 10)
    reports = []
    for c in conds:
        m = mu if mu is not None else (0.25 if c == "A" else 0.1)
        reports.append(check_condition(marg, c, m, levels=levels).to_dict())
    print(json.dumps({"family": family, "marginal": marg.to_dict(), "reports": reports}, indent=2))
    return EXIT_OK


def cmd_constants(args, cfg) -> int:
    n = merged(cfg, "asymptotics", "n", args.n)
    if n is None:
        raise UsageError("missing required field: n (--n or [asymptotics] n)")
    beta = merged(cfg, "lrd_model", "beta", args.beta)
    if beta is None:
        raise UsageError("missing required field: beta (--beta or [lrd_model] beta)")
    sv = merged(cfg, "lrd_model", "slowly_varying", args.slowly_varying, "constant")
    sv_val = merged(cfg, "lrd_model", "slowly_varying_value", args.slowly_varying_value)
    L0 = SlowlyVarying.constant(1.0 if sv_val is None else sv_val) if sv == "constant" \
        else SlowlyVarying.log_power(0.0 if sv_val is None else sv_val)
    m = merged(cfg, "lrd_model", "truncation_m", args.truncation_m)
    eps = merged(cfg, "lrd_model", "tail_eps", None, 1e-4)
    spec = CoefficientSpec(float(beta), L0, truncation_m=m, tail_eps=eps)
    var = merged(cfg, "lrd_model", "variance", None, 1.0)
    cov = asy.autocovariances(spec, var, n)
    sc = asy.sigma_constants(cov, spec, n, merged(cfg, "asymptotics", "C_delta", args.C_delta, 1.0))
    payload = {"scaling": sc.to_dict(), "truncation_m": spec.truncation_m,
               "tail_fraction": spec.tail_fraction(), "lil_constant": asy.lil_constant(spec.beta),
               "karamata_constant": asy.karamata_constant(spec.beta),
               "vervaat_error_prefactor": asy.vervaat_error_prefactor(spec.beta)}
    print(json.dumps(payload, indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _intlist(s):
    return tuple(int(float(v)) for v in s.split(",") if v.strip())


def _floatlist(s):
    return tuple(float(v) for v in s.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lrdvervaat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def model_flags(sp):
        sp.add_argument("--config", help="INI config file; flags override its values")
        sp.add_argument("--beta", type=float)
        sp.add_argument("--slowly-varying", dest="slowly_varying", choices=["constant", "log_power"])
        sp.add_argument("--slowly-varying-value", dest="slowly_varying_value", type=float)
        sp.add_argument("--truncation-m", dest="truncation_m", type=int)

    s = sub.add_parser("simulate", help="simulate one path and write it as CSV")
    model_flags(s)
    s.add_argument("--truncation-factor", dest="truncation_factor", type=int)
    s.add_argument("--innovations", choices=list(InnovationLaw.KINDS))
    s.add_argument("--n", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="Monte Carlo verdict for one theorem")
    model_flags(v)
    v.add_argument("--truncation-factor", dest="truncation_factor", type=int)
    v.add_argument("--theorem", choices=list(mc.THEOREMS))
    v.add_argument("--R", type=int)
    v.add_argument("--n-list", dest="n_list", type=_intlist)
    v.add_argument("--locations", type=_floatlist)
    v.add_argument("--seed", type=int, help="master seed")
    v.add_argument("--threads", type=int, help="worker count (default: $THREADS or all cores)")
    v.add_argument("--ks-alpha", dest="ks_alpha", type=float)
    v.add_argument("--trend-factor", dest="trend_factor", type=float)
    v.add_argument("--location-fraction", dest="location_fraction", type=float)
    v.add_argument("--C-delta", dest="C_delta", type=float)
    v.add_argument("--prefactor", type=float, help="override the thm14 limit prefactor")
    v.add_argument("--force", action="store_true", help="run even outside the theorem's hypotheses")
    v.add_argument("--out-dir", dest="out_dir", default="results")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("check-conditions", help="numerical check of the density-quantile conditions")
    c.add_argument("--config")
    c.add_argument("--family", choices=["gaussian", "pareto", "pareto_tail"])
    c.add_argument("--mu", type=float)
    c.add_argument("--condition", choices=["A", "B", "C"])
    c.add_argument("--sigma", type=float)
    c.add_argument("--alpha", type=float)
    c.add_argument("--delta", type=float)
    c.add_argument("--levels", type=int)
    c.set_defaults(func=cmd_check_conditions)

    k = sub.add_parser("constants", help="exact and asymptotic scaling constants")
    model_flags(k)
    k.add_argument("--n", type=int)
    k.add_argument("--C-delta", dest="C_delta", type=float)
    k.set_defaults(func=cmd_constants)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else {}
        return args.func(args, cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, ValueError, MemoryError) as exc:
        print(f"error: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
