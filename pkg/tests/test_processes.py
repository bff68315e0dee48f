import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrdvervaat._kernels import step_integrals_numpy, step_integrals_numba
from lrdvervaat.marginals import density_quantile_profile, gaussian, pareto_tail
from lrdvervaat.model import CoefficientSpec, InnovationLaw, LinearProcessModel, simulate_path
from lrdvervaat.processes import (
    GridMismatchError,
    MarginalMismatchError,
    ProcessEvaluation,
    StepProcess,
    UniformSample,
    a_n_functional,
    alpha_n,
    bahadur_kiefer,
    beta_n,
    bk_residual,
    q_n,
    sup_grid,
    u_n,
    uniformize,
    vervaat,
    vervaat_error,
)

RIEMANN_M = 10**6


def riemann(fn, t):
    """Midpoint rule with RIEMANN_M cells on [0, t]."""
    y = t * (np.arange(RIEMANN_M) + 0.5) / RIEMANN_M
    return fn(y).sum() * t / RIEMANN_M


# ---------------------------------------------------------------------------
# hand instances
# ---------------------------------------------------------------------------

U2 = [0.2, 0.6]


def test_alpha_hand():
    assert alpha_n(U2, [0.5], 1.0).values[0] == pytest.approx(0.0)
    assert alpha_n(U2, [0.25], 1.0).values[0] == pytest.approx(0.5)
    assert alpha_n(U2, [1 - 1e-12], 1.0).values[0] == pytest.approx(0.0, abs=1e-10)


def test_u_hand():
    assert u_n(U2, [0.5], 1.0).values[0] == pytest.approx(0.6)
    s = UniformSample([0.3, 0.1, 0.7, 0.9])
    assert s.quantile(0.25) == 0.1  # y = 1/n exactly -> first order statistic
    assert s.quantile(0.0) == 0.1


def test_bk_hand():
    y = [0.25]
    r = bahadur_kiefer(alpha_n(U2, y, 1.0), u_n(U2, y, 1.0))
    assert r.values[0] == pytest.approx(0.4)
    a = alpha_n(U2, y, 1.0)
    assert bahadur_kiefer(a, a).values[0] == 0.0


def test_empty_and_scale_rejected():
    with pytest.raises(ValueError):
        alpha_n([], [0.5], 1.0)
    with pytest.raises(ValueError):
        u_n(U2, [0.5], 0.0)


def test_grid_mismatch():
    a = alpha_n(U2, [0.2, 0.3], 1.0)
    with pytest.raises(GridMismatchError):
        bahadur_kiefer(a, u_n(U2, [0.2, 0.4], 1.0))
    with pytest.raises(GridMismatchError):
        vervaat_error(vervaat(U2, [0.2, 0.3], 2.0), a)


def test_vervaat_t_range():
    with pytest.raises(ValueError):
        vervaat(U2, [1.5], 1.0)
    assert vervaat(U2, [0.0], 1.0).values[0] == 0.0
    assert vervaat_error(vervaat(U2, [0.0], 1.0), alpha_n(U2, [0.0], 1.0)).values[0] == 0.0


def test_a_n_fixed_point():
    # U_n(t) = t when t is itself the order statistic at index ceil(nt)
    u = [0.25, 0.5, 0.75, 0.9]
    assert a_n_functional(u, [0.5], 1.0).values[0] == pytest.approx(0.0, abs=1e-15)


def test_step_process_conventions():
    ecdf = StepProcess.empirical_cdf([0.3, 0.1, 0.7])
    assert ecdf(0.3) == pytest.approx(2 / 3)  # right-continuous
    assert ecdf(0.3 - 1e-12) == pytest.approx(1 / 3)
    qf = StepProcess.sample_quantile([0.3, 0.1, 0.7])
    assert qf(1 / 3) == 0.1  # left-continuous at k/n
    assert qf(1 / 3 + 1e-12) == 0.3
    assert qf(0.0) == 0.1
    with pytest.raises(ValueError):
        StepProcess(np.array([0.2, 0.1]), np.zeros(3))


def test_sample_quantile_agrees_with_uniform_sample():
    rng = np.random.default_rng(4)
    u = rng.random(37)
    qf = StepProcess.sample_quantile(u)
    s = UniformSample(u)
    y = np.concatenate([np.arange(38) / 37, rng.random(200)])
    assert np.array_equal(qf(y), s.quantile(y))


def test_process_serialisation(tmp_path):
    ev = alpha_n(U2, [0.1, 0.25, 0.5], 2.0)
    text = ev.to_csv(tmp_path / "a.csv")
    assert text.splitlines()[0] == "y,value" and len(text.splitlines()) == 4
    assert (tmp_path / "a.csv").read_text() == text
    d = json.loads(ev.to_json())
    assert d["kind"] == "alpha" and d["values"][1] == pytest.approx(0.25)
    with pytest.raises(ValueError):
        ProcessEvaluation("alpha", np.array([0.2, 0.1]), np.zeros(2))
    with pytest.raises(ValueError):
        ProcessEvaluation("bogus", np.array([0.2]), np.zeros(1))


# ---------------------------------------------------------------------------
# Riemann oracles (n <= 16)
# ---------------------------------------------------------------------------

def test_n1_closed_form():
    u1, sig = 0.37, 1.0
    for t in (0.1, 0.37, 0.8, 1.0):
        # alpha - u = (1{u1<=y} - y) - (y - u1) for n = 1
        closed = 2 * (max(t - u1, 0.0) - t * t + u1 * t)
        assert vervaat([u1], [t], sig).values[0] == pytest.approx(closed, abs=1e-14)
        num = 2 * riemann(lambda y: (y >= u1) - 2 * y + u1, t)
        assert vervaat([u1], [t], sig).values[0] == pytest.approx(num, abs=1e-6)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16])
def test_integrals_against_riemann(n):
    rng = np.random.default_rng(100 + n)
    u = np.sort(rng.random(n))
    s = UniformSample(u)
    sig = 0.7 + n
    for t in rng.random(3):
        ie, iu = s.integrals(np.array([t]))
        assert ie[0] == pytest.approx(riemann(s.ecdf, t), abs=1e-6)
        assert iu[0] == pytest.approx(riemann(s.quantile, t), abs=1e-6)

        def rt(y):
            return (n * (s.ecdf(y) - y) - n * (y - s.quantile(y))) / sig

        v = 2 * n / sig * riemann(rt, t)
        assert vervaat(s, [t], sig).values[0] == pytest.approx(v, abs=1e-6)
        a = s.n * (s.ecdf(t) - t) / sig
        assert vervaat_error(vervaat(s, [t], sig), alpha_n(s, [t], sig)).values[0] == pytest.approx(
            v - a * a, abs=1e-6)
        # A_n from its definition, integrating over [U_n(t), t] with orientation
        un = float(s.quantile(t))
        lo, hi = min(un, t), max(un, t)
        yy = lo + (hi - lo) * (np.arange(RIEMANN_M) + 0.5) / RIEMANN_M
        inner = ((n * (s.ecdf(yy) - yy) / sig) - a).sum() * (hi - lo) / RIEMANN_M
        a_def = 2 * n / sig * inner * (1 if t >= un else -1)
        assert a_n_functional(s, [t], sig).values[0] == pytest.approx(a_def, abs=1e-6)


def test_a_n_two_point_hand_instance():
    u = [0.2, 0.6]
    t = 0.5
    # U_n(0.5) = 0.2; alpha(y) = 2 (E(y) - y); alpha(0.5) = 0
    # A = 2*2 * int_{0.2}^{0.5} 2(0.5 - y) dy = 4 * 2 * 0.045 = 0.36
    assert a_n_functional(u, [t], 1.0).values[0] == pytest.approx(0.36, abs=1e-9)


def test_vervaat_at_one_mean_identity():
    rng = np.random.default_rng(9)
    u = rng.random(40)
    sig = 3.0
    n = u.size
    int_alpha = n * (0.5 - u.mean()) / sig
    int_u = n * (0.5 - u.mean()) / sig
    assert vervaat(u, [1.0], sig).values[0] == pytest.approx(2 * n / sig * (int_alpha - int_u), abs=1e-12)
    ie, _ = UniformSample(u).integrals(np.array([1.0]))
    assert n * (ie[0] - 0.5) / sig == pytest.approx(int_alpha, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=30),
       st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20))
def test_kernels_agree(u, t):
    u = np.sort(np.array(u))
    t = np.array(t)
    a = step_integrals_numpy(u, t)
    b = step_integrals_numba(u, t)
    assert np.allclose(a[0], b[0], rtol=1e-13, atol=1e-15)
    assert np.allclose(a[1], b[1], rtol=1e-13, atol=1e-15)


# ---------------------------------------------------------------------------
# identities on simulated paths
# ---------------------------------------------------------------------------

def _paths(n, count, seed0=0):
    model = LinearProcessModel(CoefficientSpec(0.7, truncation_m=4 * n))
    marg = gaussian(math.sqrt(model.marginal_variance))
    for k in range(count):
        yield simulate_path(model, n, seed0 + k), marg


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.sampled_from([8, 64, 1024]))
def test_identities_property(seed, n):
    (path, marg), = _paths(n, 1, seed)
    u = uniformize(path, marg)
    s = UniformSample(u)
    sig = math.sqrt(n) * 1.3
    t = np.unique(np.concatenate([np.linspace(0, 1, 257), s.jump_points()]))
    a = alpha_n(s, t, sig)
    r = bahadur_kiefer(a, u_n(s, t, sig))
    w = vervaat_error(vervaat(s, t, sig), a)
    A = a_n_functional(s, t, sig)
    scale = max(1.0, np.abs(A.values).max())
    assert np.max(np.abs(w.values - (A.values - r.values**2))) <= 1e-9 * scale
    # E_n(U_n(y)) = y + O(1/n)
    assert np.max(np.abs(s.ecdf(s.quantile(t)) - t)) <= 1 / n + 1e-15
    # beta_n(Q(y)) = alpha_n(y)
    # away from jump points, where Q(F(.)) roundoff could cross a jump
    y = np.linspace(0, 1, 257)[1:-1]
    y = y[np.min(np.abs(y[:, None] - s.u[None, :]), axis=1) > 1e-9]
    b = beta_n(path.x, marg, marg.quantile(y), sig)
    assert np.allclose(b.values, alpha_n(s, y, sig).values, rtol=0, atol=1e-9)


def test_q_n_hand():
    marg = gaussian()
    x = np.array([0.4, -0.3])
    ev = q_n(x, marg, [0.5, 0.75], 1.0)
    assert ev.values[0] == pytest.approx(2 * (0.0 - (-0.3)))
    assert ev.values[1] == pytest.approx(2 * (marg.quantile(0.75) - 0.4))
    assert beta_n(x, marg, [-40.0], 1.0).values[0] == pytest.approx(0.0, abs=1e-12)


def test_q_n_through_uniform_quantile():
    """Q_n = Q(U_n), and q_n ~ u_n / fQ to first order and the second-order Taylor term reduces the error."""
    (path, marg), = _paths(2**14, 1, 77)
    s = UniformSample(uniformize(path, marg))
    y = np.array([0.3, 0.5, 0.7])
    n, sig = s.n, 1.0
    q = q_n(path.x, marg, y, sig).values
    exact = n * (marg.quantile(y) - marg.quantile(s.quantile(y))) / sig
    assert np.allclose(q, exact, rtol=1e-9)
    prof = density_quantile_profile(marg)
    un = u_n(s, y, sig).values
    first = un / prof.fQ(y)
    # Q'' = -fQ' / fQ**2, so the remainder is -(n/sig) Q''(y) (U_n - y)**2 / 2 + O(third order)
    second = first + 0.5 * (prof.fQ_prime(y) / prof.fQ(y) ** 2) * un**2 * sig / n
    # U_n - y is not small for a single long-memory path, so only require improvement
    assert np.all(np.abs(q - second) <= np.abs(q - first) * (1 + 1e-12))


def test_uniformize_checks():
    (path, marg), = _paths(64, 1)
    u = uniformize(path, marg)
    assert np.all((u > 0) & (u < 1))
    assert np.array_equal(np.sort(u), marg.cdf(np.sort(path.x)))
    with pytest.raises(MarginalMismatchError):
        uniformize(path, gaussian(2 * marg.sigma))
    with pytest.raises(MarginalMismatchError):
        uniformize(path, pareto_tail(4, 1))
    model = LinearProcessModel(np.array([1.0]), InnovationLaw("scaled_uniform"))
    with pytest.raises(MarginalMismatchError):
        uniformize(simulate_path(model, 5, 0), gaussian())
    zero = LinearProcessModel(np.array([1.0]))
    p0 = simulate_path(zero, 3, 0)
    assert gaussian().cdf(0.0) == 0.5 and uniformize(p0, gaussian()).shape == (3,)


def test_uniform_ks_finite():
    (path, marg), = _paths(2**12, 1, 5)
    u = np.sort(uniformize(path, marg))
    d = np.max(np.abs(u - (np.arange(1, u.size + 1) - 0.5) / u.size))
    assert math.isfinite(d) and 0 < d < 1


def test_tie_nudging(caplog):
    with caplog.at_level(logging.WARNING):
        s = UniformSample([0.3, 0.3, 0.3, 0.5])
    assert np.all(np.diff(s.u) > 0)
    assert "tied" in caplog.text


def test_sup_grid_contains_jumps():
    rng = np.random.default_rng(1)
    s = UniformSample(rng.random(50))
    lo, hi = 0.1, 0.85
    g = sup_grid(s, lo, hi)
    jp = s.jump_points()
    inside = jp[(jp >= lo) & (jp <= hi)]
    assert np.all(np.isin(inside, g))
    assert g[0] == lo and g[-1] == hi


def test_bk_residual_matches_processes():
    (path, marg), = _paths(256, 1, 3)
    s = UniformSample(uniformize(path, marg))
    y = np.linspace(0.1, 0.9, 33)
    sig = 40.0
    sx = float(np.sum(path.x))
    prof = density_quantile_profile(marg)
    r = bahadur_kiefer(alpha_n(s, y, sig), u_n(s, y, sig)).values
    expect = 256 * r / sig - prof.fprimeQ(y) * (sx / sig) ** 2
    assert np.allclose(bk_residual(s, y, sig, sx, prof), expect, rtol=1e-12, atol=1e-12)
