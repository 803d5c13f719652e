import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from noisy_pbc.noise import (
    InfeasibleError,
    NoiseError,
    NoiseSpec,
    expected_log_L0,
    expected_log_pair,
    mathcal_V,
    monte_carlo_log_pair,
    sample,
    stream,
    transform,
)


def test_stream_is_reproducible_and_keyed():
    a = stream(7, 1, 2).random(5)
    b = stream(7, 1, 2).random(5)
    c = stream(7, 2, 1).random(5)
    d = stream(8, 1, 2).random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_stream_frozen_values():
    # guards against silent changes in the stream construction
    u = stream(0, 0).random(3)
    assert u.shape == (3,)
    assert np.all((0 <= u) & (u < 1))
    np.testing.assert_array_equal(u, stream(0, 0).random(3))


def test_transform_kinds():
    u = np.array([0.0, 0.25, 0.4999, 0.5, 0.9])
    np.testing.assert_array_equal(transform(NoiseSpec.bernoulli(), u), [-1, -1, -1, 1, 1])
    np.testing.assert_allclose(transform(NoiseSpec.uniform(), u), 2 * u - 1)
    d = NoiseSpec.discrete([(0.5, 0.25), (1.0, 0.25)])
    np.testing.assert_array_equal(transform(d, np.array([0.1, 0.3, 0.6, 0.9])),
                                  [-1.0, -0.5, 0.5, 1.0])


def test_discrete_validation():
    with pytest.raises(NoiseError):
        NoiseSpec("gaussian")
    with pytest.raises(NoiseError):
        NoiseSpec("discrete")
    with pytest.raises(NoiseError):
        NoiseSpec.discrete([(1.0, 0.3)])
    with pytest.raises(NoiseError):
        NoiseSpec.discrete([(0.5, 0.5)])  # no atom at 1
    with pytest.raises(NoiseError):
        NoiseSpec.discrete([(1.5, 0.5)])
    with pytest.raises(NoiseError):
        NoiseSpec("uniform", ((1.0, 0.5),))


def test_config_roundtrip_and_moments():
    d = NoiseSpec.discrete([(0.5, 0.25), (1.0, 0.25)])
    assert NoiseSpec.from_config(d.to_config()) == d
    assert NoiseSpec.from_config("uniform") == NoiseSpec.uniform()
    assert NoiseSpec.bernoulli().mu2 == 1.0
    assert NoiseSpec.uniform().mu2 == pytest.approx(1 / 3)
    assert d.mu2 == pytest.approx(2 * 0.25 * 0.25 + 2 * 0.25)


def test_sample_moments():
    rng = stream(3, 0)
    xs = sample(NoiseSpec.uniform(), rng, 200_000)
    assert abs(xs.mean()) < 0.01
    assert np.var(xs) == pytest.approx(1 / 3, abs=0.01)
    assert isinstance(sample(NoiseSpec.bernoulli(), rng), float)


def test_V_at_the_piecewise_example():
    v = mathcal_V(3, 2, 0.36, 0.2)
    assert v == pytest.approx(0.8724, abs=5e-4)
    # the two-point expected log is half the log of V
    assert expected_log_pair(3, 2, 0.36, 0.2, NoiseSpec.bernoulli()) == pytest.approx(
        0.5 * math.log(0.8724), abs=5e-4)


def test_expected_log_L0_feasibility():
    with pytest.raises(InfeasibleError):
        expected_log_L0(2.5, 0.5, 0.3, NoiseSpec.uniform())
    assert expected_log_L0(2.5, 0.3, 0.0, NoiseSpec.uniform()) == pytest.approx(
        math.log(0.7 * 2.5 - 0.3))
    with pytest.raises(InfeasibleError):
        expected_log_pair(3, 2, 0.6, 0.1, NoiseSpec.bernoulli())


def test_uniform_expected_log_closed_form():
    # E ln(A - c u) for u ~ U(-1, 1) has the closed form below
    L0, a, l = 2.5, 0.405, 0.2
    A = (1 - a) * L0 - a
    c = l * (L0 + 1)
    exact = ((A + c) * math.log(A + c) - (A - c) * math.log(A - c)) / (2 * c) - 1
    assert expected_log_L0(L0, a, l, NoiseSpec.uniform()) == pytest.approx(exact, abs=1e-12)


def test_monte_carlo_matches_closed_form():
    rng = stream(11, 0)
    mean, se, bad = monte_carlo_log_pair(3, 2, 0.36, 0.2, NoiseSpec.uniform(), 200_000, rng)
    exact = expected_log_pair(3, 2, 0.36, 0.2, NoiseSpec.uniform())
    assert bad == 0
    assert abs(mean - exact) < 4 * se


feasible = st.tuples(
    st.floats(1.05, 6.0), st.floats(1.05, 6.0), st.floats(0.0, 0.6), st.floats(0.0, 0.3))


@settings(max_examples=300, deadline=None)
@given(feasible)
def test_bernoulli_pair_is_half_log_V(t):
    Lm, Lp, a, l = t
    top = a + l
    assume((1 - top) * Lm - top > 1e-6 and (1 - top) * Lp - top > 1e-6)
    val = expected_log_pair(Lm, Lp, a, l, NoiseSpec.bernoulli())
    assert val == pytest.approx(0.5 * math.log(mathcal_V(Lm, Lp, a, l)), abs=1e-12)
    # the same law written as explicit atoms
    atoms = NoiseSpec.discrete([(1.0, 0.5)])
    assert expected_log_pair(Lm, Lp, a, l, atoms) == pytest.approx(val, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(0.0, 0.5), st.floats(0.0, 0.3))
def test_L0_is_the_symmetric_pair(L0, a, l):
    assume(a + l < L0 / (L0 + 1) - 1e-6)
    for noise in (NoiseSpec.bernoulli(), NoiseSpec.uniform()):
        assert expected_log_L0(L0, a, l, noise) == pytest.approx(
            0.5 * expected_log_pair(L0, L0, a, l, noise), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.05, 6.0), st.floats(0.0, 0.5), st.floats(0.001, 0.3))
def test_noise_lowers_expected_log(L0, a, l):
    # ln is concave and script_L is affine in beta, so Jensen applies
    assume(a + l < L0 / (L0 + 1) - 1e-6)
    base = expected_log_L0(L0, a, 0.0, NoiseSpec.uniform())
    assert expected_log_L0(L0, a, l, NoiseSpec.uniform()) <= base + 1e-12
    assert expected_log_L0(L0, a, l, NoiseSpec.bernoulli()) <= base + 1e-12
