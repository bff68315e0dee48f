import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lrdvervaat.model import (
    CoefficientSpec,
    InnovationLaw,
    LinearProcessModel,
    ModelError,
    SlowlyVarying,
    compute_y2,
    make_coefficients,
    simulate_path,
    tail_variance_bound,
    truncation_for,
)


def brute_y2(path):
    """Direct double loop over i and 1 <= j1 < j2 <= M."""
    c = path.model.c
    m = path.model.truncation_m
    e = path.innovations
    total = 0.0
    for i in range(path.n):
        pos = i + m
        for j1 in range(1, m + 1):
            for j2 in range(j1 + 1, m + 1):
                total += c[j1] * c[j2] * e[pos - j1] * e[pos - j2]
    return total


# ---------------------------------------------------------------------------
# coefficients
# ---------------------------------------------------------------------------

def test_coefficient_examples():
    c = make_coefficients(CoefficientSpec(0.7, truncation_m=8))
    assert c[1] == 1.0
    assert c[4] == pytest.approx(4**-0.7, rel=1e-15)
    assert c[4] == pytest.approx(0.378929, abs=1e-6)
    c = make_coefficients(CoefficientSpec(0.6, SlowlyVarying.log_power(1.0), truncation_m=4))
    assert c[0] == pytest.approx(1.0, rel=1e-15)
    assert np.all(c > 0)


@pytest.mark.parametrize("beta", [0.5, 1.0, 0.3, 1.2])
def test_beta_boundaries_rejected(beta):
    with pytest.raises(ModelError, match="beta outside"):
        CoefficientSpec(beta, truncation_m=10)


def test_truncation_rejected():
    with pytest.raises(ModelError):
        CoefficientSpec(0.7, truncation_m=0)


def test_truncation_rule_meets_tail_bound():
    spec = CoefficientSpec(0.8, tail_eps=1e-3)
    assert spec.tail_fraction() <= 1e-3 * (1 + 1e-9)
    # one lag less would violate the rule (the search is tight up to rounding)
    assert tail_variance_bound(0.8, spec.slowly_varying, spec.truncation_m * 0.9) > 0


def test_truncation_cap_logs(caplog):
    m = truncation_for(0.55, SlowlyVarying(), 1e-4, max_m=2**20)
    assert m == 2**20
    assert "cap" in caplog.text.lower()


# ---------------------------------------------------------------------------
# innovations
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("kind", InnovationLaw.KINDS)
def test_innovation_moments(kind):
    law = InnovationLaw(kind, variance=2.0)
    e = law.sample(np.random.default_rng(0), 400_000)
    assert abs(e.mean()) < 0.02
    assert e.var() == pytest.approx(2.0, rel=0.02)
    assert np.mean(e**4) == pytest.approx(law.fourth_moment, rel=0.06)


def test_unknown_innovation():
    with pytest.raises(ModelError):
        InnovationLaw("cauchy")


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

def test_white_noise_identity():
    model = LinearProcessModel(np.array([1.0]), InnovationLaw("scaled_uniform"))
    p = simulate_path(model, 50, 3)
    assert np.array_equal(p.x, p.innovations)


def test_hand_convolution():
    model = LinearProcessModel(np.array([1.0, 0.5]))
    p = simulate_path(model, 3, 11)
    e = p.innovations
    assert np.allclose(p.x, [e[1] + 0.5 * e[0], e[2] + 0.5 * e[1], e[3] + 0.5 * e[2]], rtol=0, atol=1e-15)


def test_seed_determinism():
    model = LinearProcessModel(CoefficientSpec(0.7, truncation_m=300))
    a, b = simulate_path(model, 200, 42), simulate_path(model, 200, 42)
    assert a.x.tobytes() == b.x.tobytes()
    assert a.innovations.tobytes() == b.innovations.tobytes()
    assert not a.x.flags.writeable


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 512), m=st.integers(1, 512), seed=st.integers(0, 2**32))
def test_fft_matches_direct(n, m, seed):
    model = LinearProcessModel(CoefficientSpec(0.7, truncation_m=m))
    a = simulate_path(model, n, seed, method="direct")
    b = simulate_path(model, n, seed, method="fft")
    assert np.allclose(a.x, b.x, rtol=1e-8, atol=1e-8 * np.abs(a.x).max())


def test_sample_variance_matches_model():
    model = LinearProcessModel(CoefficientSpec(0.7, truncation_m=2**16))
    p = simulate_path(model, 2**16, 42)
    # long memory: the sample variance around the sample mean is biased down by Var(mean)
    assert p.x.var() == pytest.approx(model.marginal_variance, rel=0.05)


# ---------------------------------------------------------------------------
# polynomial forms
# ---------------------------------------------------------------------------

def test_y2_single_lag_is_zero():
    model = LinearProcessModel(np.array([0.9, 0.4]))
    assert compute_y2(simulate_path(model, 1, 5)).y2 == pytest.approx(0.0, abs=1e-15)


def test_y2_single_pair():
    model = LinearProcessModel(np.array([1.0, 0.5, 0.25]))
    p = simulate_path(model, 1, 8)
    e = p.innovations  # eps_{-2}, eps_{-1}, eps_0
    assert compute_y2(p).y2 == pytest.approx(0.125 * e[1] * e[0], rel=1e-12)


def test_y2_brute_force_example():
    model = LinearProcessModel(CoefficientSpec(0.7, truncation_m=30))
    p = simulate_path(model, 20, 2024)
    assert compute_y2(p).y2 == pytest.approx(brute_y2(p), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 60), m=st.integers(1, 60), seed=st.integers(0, 2**32),
       method=st.sampled_from(["direct", "fft"]))
def test_y2_brute_force_property(n, m, seed, method):
    model = LinearProcessModel(CoefficientSpec(0.65, truncation_m=m))
    p = simulate_path(model, n, seed)
    forms = compute_y2(p, method=method)
    ref = brute_y2(p)
    assert forms.y2 == pytest.approx(ref, rel=1e-10, abs=1e-12 * max(1.0, abs(ref)))
    assert forms.y1 == pytest.approx(math.fsum(p.x), rel=1e-9, abs=1e-12)


def test_model_serialisation():
    model = LinearProcessModel(CoefficientSpec(0.7, SlowlyVarying.log_power(0.5), truncation_m=100),
                               InnovationLaw("centered_exponential_mix", 2.0))
    d = model.to_dict()
    assert d["beta"] == 0.7 and d["truncation_m"] == 100 and d["innovations"] == "centered_exponential_mix"
    assert model.marginal_variance == pytest.approx(2.0 * np.sum(model.c**2))
