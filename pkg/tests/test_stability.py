import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from noisy_pbc.maps import controlled, get_map, probe_map
from noisy_pbc.noise import NoiseSpec, expected_log_L0
from noisy_pbc.stability import (
    PARTITIONS,
    AdmissibilityError,
    CertificateError,
    ControlSpec,
    LocallyStableError,
    NotApplicableError,
    Verdict,
    alpha0,
    analytic_verdict,
    bernoulli_example_gain,
    bernoulli_example_pair,
    bernoulli_region,
    beta0,
    beta_star,
    build_envelope,
    build_report,
    check_derivative_envelope,
    check_envelope,
    construct_symmetric_gain,
    estimate_sides,
    in_S,
    local_constants,
    multi_interval_certificate,
    psi,
    refine_alpha,
    script_L,
    sides_bound,
    two_cycle_margin,
    uniform_condition,
)


@pytest.mark.parametrize("u,v,expected", [
    (2, 3, 5 / 12),
    (4.75, 2, 0.49275),
    (5, 1.4, 5 / 12),
    (6, 1.2, 0.40259),
    (5, 1.7, 0.46296),
])
def test_psi_values(u, v, expected):
    assert psi(u, v) == pytest.approx(expected, abs=1e-5)


def test_closed_form_gains():
    assert alpha0(2.5) == pytest.approx(3 / 7, abs=1e-15)
    assert alpha0(2) == pytest.approx(1 / 3, abs=1e-15)
    assert alpha0(1) == 0.0
    assert beta0(2, 1.5) == pytest.approx(4 / 15, abs=1e-15)
    with pytest.raises(LocallyStableError):
        alpha0(0.9)
    with pytest.raises(LocallyStableError):
        beta0(0.8, 1.2)
    with pytest.raises(ValueError):
        psi(-1, 2)


def test_control_admissibility():
    assert ControlSpec(0.3, 0.2).beta_range == pytest.approx((0.1, 0.5))
    for a, l in [(0.1, 0.2), (0.8, 0.25), (1.0, 0.0), (0.3, -0.1)]:
        assert not ControlSpec.admissible(a, l)
        with pytest.raises(AdmissibilityError):
            ControlSpec(a, l)


def test_bernoulli_region_ricker():
    iv = bernoulli_region(2.5, 0.368)
    assert iv.lo == pytest.approx(0.19566, abs=1e-5)
    assert iv.hi == pytest.approx(0.34629, abs=1e-5)
    # within rounding distance of the rounded reference endpoints
    assert abs(iv.lo - 0.1877) < 0.01 and abs(iv.hi - 0.342) < 0.01
    assert bernoulli_region(2.5, 0.8).empty


@settings(max_examples=300, deadline=None)
@given(st.floats(1.1, 6.0), st.floats(0.01, 0.7), st.floats(0.0, 1.0))
def test_bernoulli_region_matches_expected_log(L0, a, t):
    iv = bernoulli_region(L0, a)
    assume(not iv.empty)
    l = iv.lo + t * (iv.hi - iv.lo)
    assume(iv.lo + 1e-9 < l < iv.hi - 1e-9)
    assert expected_log_L0(L0, a, l, NoiseSpec.bernoulli()) < 0


def test_uniform_condition_values():
    # measured values at the Ricker point used for uniform noise
    chk = uniform_condition(2.5, 0.405, 0.2)
    assert chk.lhs == pytest.approx(0.0792732, abs=1e-6)
    assert chk.rhs == pytest.approx(0.0696930, abs=1e-6)
    assert chk.expected_log == pytest.approx(-0.0014945, abs=1e-6)
    # slightly larger alpha clears the displayed inequality
    assert uniform_condition(2.5, 0.41, 0.2).holds
    assert uniform_condition(2.5, 0.7, 0.2).verdict is Verdict.INFEASIBLE


@settings(max_examples=300, deadline=None)
@given(st.floats(1.1, 6.0), st.floats(0.0, 0.7), st.floats(0.001, 0.3))
def test_uniform_sufficient_implies_exact(L0, a, l):
    # the displayed inequality is a truncation, so it is sufficient but not necessary
    chk = uniform_condition(L0, a, l)
    assume(chk.verdict is not Verdict.INFEASIBLE)
    if chk.holds:
        assert chk.expected_log < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(1.01, 8.0), st.floats(1.01, 8.0))
def test_beta0_identity(Lm, Lp):
    assume(Lm * Lp > 1 + 1e-6)
    b = beta0(Lm, Lp)
    assert script_L(Lm, b) * script_L(Lp, b) == pytest.approx(1.0, abs=1e-12)
    assert 0 < b < 1


@pytest.mark.parametrize("name,kw,lo,hi", [
    ("ricker", {"r": 3.5}, 3 / 7 - 1e-3, 3 / 7 + 1e-3),
    ("ricker", {"r": 3.0}, 1 / 3 - 1e-3, 1 / 3 + 1e-3),
    ("exnotglob", {}, 0.417, 0.464),
    ("exglob", {}, 5 / 12 - 1e-3, 5 / 12 + 1e-3),
])
def test_beta_star(name, kw, lo, hi):
    b = beta_star(get_map(name, **kw))
    assert lo < b < hi


def test_beta_star_scan_agrees_with_bisection():
    spec = get_map("ricker", r=3.5)
    a = beta_star(spec)
    b = beta_star(spec, mode="scan", scan_step=2e-3, n=2000)
    assert abs(a - b) < 3e-3


def test_two_cycle_margin_sign():
    spec = get_map("exnotglob")
    m, x = two_cycle_margin(spec, None, 5 / 12, return_witness=True)
    assert m < 0
    assert not in_S(spec, None, 5 / 12)
    assert in_S(spec, None, 0.47)
    # reference second iterate at x = 28
    assert float(controlled(spec, 5 / 12, controlled(spec, 5 / 12, 28.0))) == pytest.approx(
        26.7458333, abs=1e-6)


def test_refine_alpha_exnotglob():
    a, Lm, _ = PARTITIONS["exnotglob"]
    r = refine_alpha(get_map("exnotglob"), a, Lm)
    assert r.alpha_bar == pytest.approx(0.46296, abs=1e-4)
    assert in_S(get_map("exnotglob"), None, r.alpha_bar + 1e-3)


def test_multi_interval_certificates():
    a, Lm, Lp = PARTITIONS["exglob"]
    cert = multi_interval_certificate(get_map("exglob"), a, Lm, Lp, check_alphas=[0.42, 0.45, 0.5])
    assert cert.certified
    assert cert.alpha0 == pytest.approx(5 / 12)
    np.testing.assert_allclose(cert.envelope.b, [32, 100 / 3, 115 / 3, 497 / 12], atol=1e-9)
    json.dumps(cert.to_dict())
    a, Lm, Lp = PARTITIONS["exnotglob"]
    bad = multi_interval_certificate(get_map("exnotglob"), a, Lm, Lp)
    assert not bad.certified
    assert "Psi" in bad.reason


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.05, 3.0), min_size=1, max_size=5),
       st.lists(st.floats(0.2, 5.0), min_size=5, max_size=5))
def test_envelope_is_decreasing_involution(gaps, slopes):
    a = [10.0]
    for g in gaps:
        a.append(a[-1] - g)
    assume(a[-1] > 0)
    env = build_envelope(a, slopes[:len(gaps)])
    xs = np.linspace(*env.domain, 501)
    ys = env(xs)
    assert np.all(np.diff(ys) < 0)
    np.testing.assert_allclose(env(ys), xs, atol=1e-9)
    assert env(10.0) == pytest.approx(10.0)


def test_build_envelope_errors():
    with pytest.raises(ValueError):
        build_envelope([1.0], [])
    with pytest.raises(ValueError):
        build_envelope([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        build_envelope([1.0, 0.5], [-1.0])


def test_check_envelope_detects_violation():
    env = build_envelope([1.0, 0.5], [2.0])
    good = check_envelope(lambda x: controlled(get_map("ricker", r=2.5), 0.0, x), env, env.domain, 500)
    assert good.margin is not None
    # the identity map never satisfies g > x on the left
    bad = check_envelope(lambda x: np.asarray(x, dtype=float), env, env.domain, 500)
    assert not bad.ok


def test_derivative_envelope_quail():
    chk = check_derivative_envelope(get_map("quail"))
    assert chk.ok
    assert chk.alpha0 == pytest.approx(35 / 81, abs=1e-9)
    assert chk.max_envel == pytest.approx(0.4320964, abs=1e-6)
    with pytest.raises(NotApplicableError):
        check_derivative_envelope(get_map("exglob"))


@pytest.mark.parametrize("L0", [1.5, 2, 2.5, 3, 5])
@pytest.mark.parametrize("kind", ["bernoulli", "uniform"])
def test_construct_symmetric_gain(L0, kind):
    noise = NoiseSpec(kind)
    c = construct_symmetric_gain(L0, noise)
    a0 = alpha0(L0)
    assert c.alpha < a0
    assert a0 < c.alpha + c.ell < L0 / (L0 + 1)
    assert expected_log_L0(L0, c.alpha, c.ell, noise) < 0


def test_bernoulli_example_gain_range():
    assert bernoulli_example_pair(2.5) == pytest.approx((1.25 / 3.5, 0.75 / 3.5))
    c = bernoulli_example_gain(2.2)
    assert c.alpha == pytest.approx(0.34375)
    with pytest.raises(CertificateError):
        bernoulli_example_gain(3.0)
    with pytest.raises(ValueError):
        bernoulli_example_gain(2.0)


def test_sides_and_local_constants():
    assert sides_bound(1.0, 1.0) == 0.5
    assert sides_bound(math.inf, 3.0) == 0.75
    a1, a2 = estimate_sides(get_map("exswitch"))
    assert a1 == pytest.approx(1.0, abs=0.05) and a2 == pytest.approx(1.0, abs=0.05)
    assert local_constants(get_map("exglob")) == pytest.approx((3.0, 2.0), abs=1e-6)


def test_analytic_verdict_cases():
    b, u = NoiseSpec.bernoulli(), NoiseSpec.uniform()
    bs = 3 / 7
    assert analytic_verdict(0.2, 0.3, b, bs, L0=2.5) is Verdict.INFEASIBLE
    assert analytic_verdict(0.5, 0.05, b, bs, L0=2.5) is Verdict.HOLDS
    assert analytic_verdict(0.3, 0.0, b, bs, L0=2.5) is Verdict.FAILS
    assert analytic_verdict(0.368, 0.25, b, bs, L0=2.5) is Verdict.HOLDS
    assert analytic_verdict(0.368, 0.1, b, bs, L0=2.5) is Verdict.FAILS
    assert analytic_verdict(0.41, 0.2, u, bs, L0=2.5) is Verdict.HOLDS
    with pytest.raises(ValueError):
        analytic_verdict(0.41, 0.2, u, bs)
    assert analytic_verdict(0.25, 0.05, b, 4 / 15, L_pair=(2, 1.5), sides=(1, 1)) is Verdict.FAILS


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 0.99), st.floats(0.0, 0.5))
def test_holds_verdict_is_admissible(a, l):
    v = analytic_verdict(a, l, NoiseSpec.bernoulli(), 3 / 7, L0=2.5)
    if v is Verdict.HOLDS:
        assert ControlSpec.admissible(a, l)
        assert a + l > 3 / 7


@pytest.mark.parametrize("name", ["ricker", "quail", "exglob", "exnotglob", "exswitch"])
def test_build_report_serialises(name):
    rep = build_report(get_map(name), NoiseSpec.bernoulli(), None)
    doc = json.loads(rep.to_json())
    assert doc["probe"]["K"] == pytest.approx(probe_map(get_map(name)).K)
    assert "beta_star" in doc["constants"]
