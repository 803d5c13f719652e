import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisy_pbc.maps import controlled, get_map
from noisy_pbc.oracles import exact_beta_star, two_cycles
from noisy_pbc.stability import beta_star, in_S


def test_exact_thresholds():
    assert exact_beta_star(get_map("exglob")) == pytest.approx(5 / 12, abs=1e-9)
    assert exact_beta_star(get_map("exnotglob")) == pytest.approx(0.452862, abs=1e-6)


@pytest.mark.parametrize("name", ["exglob", "exnotglob"])
def test_oracle_agrees_with_bisection(name):
    spec = get_map(name)
    assert abs(exact_beta_star(spec) - beta_star(spec)) < 1e-3


def test_two_cycles_are_genuine():
    spec = get_map("exnotglob")
    cyc = two_cycles(spec, 0.45)
    assert cyc
    for c in cyc:
        y = float(controlled(spec, 0.45, c.x))
        assert y == pytest.approx(c.y, abs=1e-9)
        assert float(controlled(spec, 0.45, y)) == pytest.approx(c.x, abs=1e-9)
        assert c.x < 32 < c.y
    assert two_cycles(get_map("exglob"), 0.42) == []


def test_requires_piecewise_map():
    with pytest.raises(ValueError):
        exact_beta_star(get_map("ricker"))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 0.99))
def test_no_cycle_above_exact_threshold(beta):
    spec = get_map("exnotglob")
    b = exact_beta_star(spec)
    if beta > b + 1e-9:
        assert two_cycles(spec, beta) == []
        assert in_S(spec, None, beta)
