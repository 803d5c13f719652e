import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import noisy_pbc.dynamics as dyn
from noisy_pbc.dynamics import (
    Outcome,
    classify,
    convergence_probability,
    decimate_indices,
    empirical_expected_log,
    run_ensemble,
    run_trajectory,
    simulate_batch,
    step,
    trap_bound,
)
from noisy_pbc.maps import controlled, get_map, probe_map
from noisy_pbc.noise import NoiseSpec, expected_log_pair
from noisy_pbc.stability import ControlSpec

RICKER = get_map("ricker", r=3.5)
B = NoiseSpec.bernoulli()


def test_classify():
    K = 1.0
    assert classify(np.full(10, 1.0 + 1e-8), K) is Outcome.CONVERGED
    assert classify(np.tile([0.5, 1.5], 5), K) is Outcome.TWO_CYCLE
    assert classify(np.linspace(0.5, 1.5, 10), K) is Outcome.UNRESOLVED
    assert classify(np.array([1.0, np.nan]), K) is Outcome.ESCAPED


def test_step_matches_controlled():
    assert step(RICKER, 0.3, 0.5) == pytest.approx(float(controlled(RICKER, 0.3, 0.5)))
    assert isinstance(step(RICKER, 0.3, np.array([0.5, 0.7])), np.ndarray)


def test_trajectory_converges_and_is_reproducible(tmp_path):
    ctl = ControlSpec(0.37, 0.2)
    a = run_trajectory(RICKER, ctl, B, 0.5, 5000, seed=4)
    b = run_trajectory(RICKER, ctl, B, 0.5, 5000, seed=4)
    assert a.verdict is Outcome.CONVERGED
    assert a.residual < 1e-6
    assert a.steps_to_trap is not None
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    a.to_csv(pa)
    b.to_csv(pb)
    assert pa.read_bytes() == pb.read_bytes()
    assert pa.read_text().startswith("n,x_n,beta_n\n0,0.5,\n")
    # a different stream index gives a different path
    c = run_trajectory(RICKER, ctl, B, 0.5, 5000, seed=4, stream_index=1)
    assert not np.array_equal(a.betas[1:20], c.betas[1:20])


def test_noise_free_two_cycle():
    tr = run_trajectory(RICKER, ControlSpec(0.40), B, 0.5, 20_000, seed=0)
    assert tr.verdict is Outcome.TWO_CYCLE
    tr = run_trajectory(RICKER, ControlSpec(0.45), B, 0.5, 5000, seed=0, full=True)
    assert tr.verdict is Outcome.CONVERGED
    assert len(tr.samples) == 5001


def test_gains_stay_in_range():
    ctl = ControlSpec(0.3, 0.2)
    tr = run_trajectory(RICKER, ctl, NoiseSpec.uniform(), 0.5, 3000, seed=1, full=True)
    b = tr.betas[1:]
    assert np.all((b >= 0.1) & (b <= 0.5))
    assert set(np.round(run_trajectory(RICKER, ctl, B, 0.5, 500, seed=1, full=True).betas[1:], 12)) \
        == {0.1, 0.5}


def test_lane_results_do_not_depend_on_batch(monkeypatch):
    keys = [(i,) for i in range(6)]
    full = simulate_batch(RICKER, 0.36, 0.2, B, np.full(6, 0.5), 3000, 9, keys)
    alone = simulate_batch(RICKER, 0.36, 0.2, B, np.array([0.5]), 3000, 9, [(4,)])
    np.testing.assert_array_equal(full.tail[4], alone.tail[0])
    # a different chunk length must not change any draw
    monkeypatch.setattr(dyn, "CHUNK", 37)
    small = simulate_batch(RICKER, 0.36, 0.2, B, np.full(6, 0.5), 3000, 9, keys)
    np.testing.assert_array_equal(full.tail, small.tail)


def test_random_start_range():
    res = simulate_batch(RICKER, 0.45, 0.0, B, None, 0, 3, [(i,) for i in range(50)],
                         x0_range=(0.2, 0.3))
    assert np.all((res.final >= 0.2) & (res.final <= 0.3))


def test_ensemble_rate():
    ens = run_ensemble(RICKER, ControlSpec(0.45, 0.02), B, None, 3000, 40, 2)
    assert ens.rate == 1.0
    assert ens.counts()["converged"] == 40
    assert ens.trap_violations == 0 and ens.rise_violations == 0
    assert convergence_probability(RICKER, ControlSpec(0.2, 0.1), B, 0.5, 3000, 20, 2) == 0.0


def test_decimate_indices():
    assert np.array_equal(decimate_indices(100), np.arange(100))
    idx = decimate_indices(10_001)
    assert idx[0] == 0 and idx[-1] == 10_000
    assert np.all(np.diff(idx) > 0)
    assert np.array_equal(idx[:1000], np.arange(1000))


def test_empirical_expected_log():
    ctl = ControlSpec(0.36, 0.2)
    emp = empirical_expected_log(3, 2, ctl, NoiseSpec.uniform(), 200_000, seed=5)
    exact = expected_log_pair(3, 2, 0.36, 0.2, NoiseSpec.uniform())
    assert abs(emp.mean - exact) < 4 * emp.stderr
    det = empirical_expected_log(3, 2, ControlSpec(0.36), B, 10, seed=5)
    assert det.stderr == 0.0


def test_trap_bound_errors():
    with pytest.raises(ValueError):
        trap_bound(RICKER, None, 0.0, 0.3, 0.5)
    assert trap_bound(RICKER, None, 0.2, 0.4, 1.0) == 1


MAPS = [get_map("ricker", r=3.5), get_map("ricker", r=3.0), get_map("quail"),
        get_map("exglob"), get_map("exswitch")]


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(MAPS), st.floats(0.01, 0.8), st.floats(0.0, 1.0),
       st.floats(0.001, 3.0), st.integers(0, 2**32 - 1))
def test_trap_bound_contains_paths(spec, a, frac, u, seed):
    ell = frac * min(a - 1e-3, 0.95 - a)
    ell = max(ell, 0.0)
    lo, hi = max(a - ell, 1e-3), a + ell
    p = probe_map(spec)
    x0 = u * p.K
    n = trap_bound(spec, p, lo, hi, x0)
    res = simulate_batch(spec, a, ell, NoiseSpec.uniform(), np.array([x0]), n + 50, seed, [(0,)],
                         probe=p, record=0)
    path = res.path[n:]
    slack = 1e-9 * p.f_m
    assert np.all((path >= p.f2_m - slack) & (path <= p.f_m + slack))
    assert res.rise_violations[0] == 0
