"""Registry of end-to-end numerical checks, runnable from the CLI or pytest.

Each check returns a ``CheckResult``.  Tolerances are fixed here; a failing
check reports the measured values rather than raising.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import empirical_expected_log, simulate_batch, trap_bound
from .maps import controlled, get_map, probe_map
from .noise import NoiseSpec, expected_log_L0, expected_log_pair, stream
from .oracles import exact_beta_star
from .stability import (
    ControlSpec,
    alpha0,
    bernoulli_region,
    beta0,
    beta_star,
    check_derivative_envelope,
    construct_symmetric_gain,
    estimate_sides,
    mathcal_V,
    psi,
    refine_alpha,
    script_L,
    sides_bound,
    uniform_condition,
)
from .sweep import alpha_grid, bifurcation_sweep, collapse_threshold, envelope_curve, region_raster

SEED = 20240611


@dataclass
class CheckResult:
    ok: bool
    detail: str
    seconds: float = 0.0


@dataclass(frozen=True)
class Check:
    number: int
    name: str
    anchor: str
    tags: tuple[str, ...]
    fn: Callable[[], CheckResult]

    def run(self) -> CheckResult:
        t = time.perf_counter()
        res = self.fn()
        res.seconds = time.perf_counter() - t
        return res


REGISTRY: list[Check] = []


def check(number: int, name: str, anchor: str, *tags: str):
    def deco(fn):
        REGISTRY.append(Check(number, name, anchor, tags, fn))
        return fn
    return deco


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol


# ---------------------------------------------------------------------------


@check(1, "constants", "closed-form gains from the worked examples", "constants", "ricker", "exglob")
def _c1() -> CheckResult:
    rows = [
        ("psi(2,3)", psi(2, 3), 5 / 12, 1e-9),
        ("psi(4.75,2)", psi(4.75, 2), 0.49275, 1e-5),  # quoted to 5 digits
        ("psi(5,1.4)", psi(5, 1.4), 5 / 12, 1e-9),
        ("psi(6,1.2)", psi(6, 1.2), 0.40259, 1e-5),
        ("psi(5,1.7)", psi(5, 1.7), 0.46296, 1e-5),
        ("alpha0(2.5)", alpha0(2.5), 3 / 7, 1e-9),
        ("alpha0(2)", alpha0(2.0), 1 / 3, 1e-9),
        ("beta0(2,1.5)", beta0(2, 1.5), 4 / 15, 1e-9),
    ]
    bad = [f"{n}={v:.10g} (want {w:.10g})" for n, v, w, t in rows if not _close(v, w, t)]
    return CheckResult(not bad, "; ".join(bad) or f"{len(rows)} constants match")


@check(2, "V(3,2,0.36,0.2)", "two-point noise product at the piecewise example", "exglob")
def _c2() -> CheckResult:
    v = mathcal_V(3, 2, 0.36, 0.2)
    return CheckResult(_close(v, 0.8724, 5e-4), f"V = {v:.6f}")


@check(3, "G^2(5/12, 28)", "two-cycle witness for the non-global piecewise map", "exnotglob")
def _c3() -> CheckResult:
    m = get_map("exnotglob")
    v = float(controlled(m, 5 / 12, controlled(m, 5 / 12, 28.0)))
    return CheckResult(_close(v, 26.7455, 1e-3), f"G^2 = {v:.6f}")


@check(4, "Bernoulli region (2.5, 0.368)", "noise amplitudes for the Ricker example", "ricker")
def _c4() -> CheckResult:
    iv = bernoulli_region(2.5, 0.368)
    ok = _close(iv.lo, 0.1877, 0.01) and _close(iv.hi, 0.342, 0.01)
    return CheckResult(ok, f"interval = ({iv.lo:.5f}, {iv.hi:.5f}) vs (0.1877, 0.342)")


@check(5, "uniform condition (2.5, 0.405, 0.2)", "uniform noise sufficient condition, Ricker", "ricker")
def _c5() -> CheckResult:
    u = uniform_condition(2.5, 0.405, 0.2)
    ok = u.holds and u.expected_log < 0
    return CheckResult(ok, f"sufficient inequality: {u.verdict.value} (ln L = {u.lhs:.5f}, "
                           f"rhs = {u.rhs:.5f}); exact E ln = {u.expected_log:.6f}")


@check(6, "beta_* and refined gain", "two-cycle threshold by bisection", "ricker", "exnotglob")
def _c6() -> CheckResult:
    r35 = beta_star(get_map("ricker", r=3.5))
    r30 = beta_star(get_map("ricker", r=3.0))
    ng = get_map("exnotglob")
    bng = beta_star(ng)
    ref = refine_alpha(ng, (32, 31, 28), (3, 5)).alpha_bar
    ok = (_close(r35, 3 / 7, 1e-3) and _close(r30, 1 / 3, 1e-3) and 0.417 < bng < 0.464
          and _close(ref, 0.4630, 1e-3))
    return CheckResult(ok, f"ricker3.5 {r35:.5f}, ricker3.0 {r30:.5f}, exnotglob {bng:.5f}, "
                           f"refined {ref:.5f}")


@check(7, "exact two-cycle oracle", "piece-pair enumeration vs bisection", "exglob", "exnotglob")
def _c7() -> CheckResult:
    parts, ok = [], True
    for name in ("exglob", "exnotglob"):
        m = get_map(name)
        ex, bi = exact_beta_star(m), beta_star(m)
        ok &= _close(ex, bi, 1e-3)
        parts.append(f"{name}: exact {ex:.6f}, bisection {bi:.6f}")
    return CheckResult(ok, "; ".join(parts))


def _random_feasible_tuples(rng: np.random.Generator, count: int):
    out = []
    while len(out) < count:
        lp = rng.uniform(1.1, 4.0)
        lm = rng.uniform(lp, 6.0)
        top = min(lm / (lm + 1), lp / (lp + 1))
        alpha = rng.uniform(0.05, 0.9 * top)
        ell = rng.uniform(0.0, min(alpha, top - alpha) * 0.95)
        if ControlSpec.admissible(alpha, ell) and ell > 0:
            out.append((lm, lp, alpha, ell))
    return out


@check(8, "Monte Carlo vs closed form", "law of large numbers for the expected log", "noise")
def _c8() -> CheckResult:
    tuples = _random_feasible_tuples(stream(SEED, 8), 20)
    worst = 0.0
    for kind in ("bernoulli", "uniform"):
        nz = NoiseSpec(kind)
        for k, (lm, lp, a, e) in enumerate(tuples):
            exact = expected_log_pair(lm, lp, a, e, nz)
            emp = empirical_expected_log(lm, lp, ControlSpec(a, e), nz, 10**6, SEED, k)
            z = abs(emp.mean - exact) / emp.stderr
            worst = max(worst, z)
    return CheckResult(worst <= 3.0, f"largest |z| over 40 cases = {worst:.3f}")


def _threshold(r: float, lo: float, hi: float) -> float | None:
    al = alpha_grid(lo, hi, 0.005)
    tb = bifurcation_sweep(get_map("ricker", r=r), NoiseSpec.bernoulli(), 0.2, al,
                           transient=10_000 - 200, samples=200, paths_per_alpha=200,
                           master_seed=SEED)
    return collapse_threshold(al, tb.rates)


@check(9, "noisy bifurcation thresholds", "empirical collapse of the Ricker attractor", "ricker", "slow")
def _c9() -> CheckResult:
    t30 = _threshold(3.0, 0.20, 0.36)
    t35 = _threshold(3.5, 0.28, 0.44)
    ok = t30 is not None and 0.27 <= t30 <= 0.30 and t35 is not None and 0.35 <= t35 <= 0.38
    return CheckResult(ok, f"r=3.0: {t30}, r=3.5: {t35}")


@check(10, "deterministic sharpness", "noise-free Ricker threshold at 3/7", "ricker")
def _c10() -> CheckResult:
    al = alpha_grid(0.38, 0.48, 0.005)
    tb = bifurcation_sweep(get_map("ricker", r=3.5), NoiseSpec.bernoulli(), 0.0, al,
                           transient=10_000 - 200, samples=200, paths_per_alpha=50,
                           master_seed=SEED)
    t = collapse_threshold(al, tb.rates)
    return CheckResult(t is not None and abs(t - 3 / 7) <= 0.005, f"threshold {t} vs 3/7")


@check(11, "constructive noisy gain", "alpha below alpha0 with negative expected log", "noise")
def _c11() -> CheckResult:
    bad = []
    for L0 in (1.5, 2.0, 2.5, 3.0, 5.0):
        for kind in ("bernoulli", "uniform"):
            nz = NoiseSpec(kind)
            try:
                g = construct_symmetric_gain(L0, nz)
            except Exception as exc:  # noqa: BLE001 - report any construction failure
                bad.append(f"L0={L0} {kind}: {exc}")
                continue
            a0 = alpha0(L0)
            el = expected_log_L0(L0, g.alpha, g.ell, nz)
            if not (g.alpha < a0 and a0 < g.alpha + g.ell < L0 / (L0 + 1) and el < 0):
                bad.append(f"L0={L0} {kind}: alpha={g.alpha:.4f} ell={g.ell:.4f} Eln={el:.4g}")
    return CheckResult(not bad, "; ".join(bad) or "10 constructions pass")


@check(12, "quail derivative envelope", "max of envel on [x_max, K) for the quail map", "quail")
def _c12() -> CheckResult:
    q = get_map("quail")
    curve = envelope_curve(q)
    a3 = check_derivative_envelope(q)
    ok = curve.max <= 0.4319 and a3.ok
    return CheckResult(ok, f"max envel = {curve.max:.6f} (bound 0.4319), alpha0 = {a3.alpha0:.6f}, "
                           f"envelope check holds: {a3.ok}")


def _prop_trap(rng: np.random.Generator, n: int) -> int:
    fails = 0
    for name, kw in (("ricker", {"r": 3.5}), ("quail", {}), ("exglob", {}), ("exswitch", {})):
        spec = get_map(name, **kw)
        probe = probe_map(spec)
        m = n // 4
        alphas = rng.uniform(0.0, 0.95, m)
        ells = np.minimum(rng.uniform(0, 1, m) * alphas, 0.999 - alphas) * 0.999
        res = simulate_batch(spec, alphas, ells, NoiseSpec.uniform(), None, 300, SEED,
                             [(int(i),) for i in range(m)], probe=probe,
                             x0_range=(probe.f2_m, probe.f_m))
        fails += int(np.count_nonzero(res.trap_violations))
    return fails


def _prop_ordering(rng: np.random.Generator, n: int) -> int:
    fails = 0
    specs = [get_map("ricker", r=3.5), get_map("quail"), get_map("exglob"), get_map("exnotglob")]
    for _ in range(n):
        spec = specs[rng.integers(len(specs))]
        K = probe_map(spec).K
        x = float(rng.uniform(0.01, 3) * K)
        if abs(x - K) < 1e-9:
            continue
        b, a = sorted(rng.uniform(0.001, 0.999, 2))
        if a == b:
            continue
        ga, gb = float(controlled(spec, a, x)), float(controlled(spec, b, x))
        if not (min(x, gb) < ga < max(x, gb)):
            fails += 1
    return fails


def _prop_beta0(rng: np.random.Generator, n: int) -> int:
    fails = 0
    for _ in range(n):
        lp = rng.uniform(1.0001, 10)
        lm = rng.uniform(lp, 12)
        b = beta0(lm, lp)
        prod = script_L(lm, b) * script_L(lp, b)
        lo, hi = (lp - 1) / (lp + 1), min((lm - 1) / (lm + 1), lp / (lp + 1))
        if abs(prod - 1) > 1e-12 or not (lo - 1e-12 <= b <= hi + 1e-12):
            fails += 1
    return fails


def _prop_sides(rng: np.random.Generator, n: int) -> int:
    fails = 0
    cases = [(get_map("ricker", r=3.5), 0.05), (get_map("exswitch"), 0.05), (get_map("quail"), 0.05)]
    per = n // len(cases) + 1
    for spec, frac in cases:
        K = probe_map(spec).K
        theta = frac * K
        a1, a2 = estimate_sides(spec, theta=theta)
        bound = sides_bound(a1, a2)
        for _ in range(per):
            beta = float(rng.uniform(0, bound * (1 - 1e-6)))
            x = float(K + rng.uniform(-theta, theta))
            if x == K:
                continue
            y = float(controlled(spec, beta, x))
            if not np.sign(y - K) == -np.sign(x - K):
                fails += 1
    return fails


def _prop_trap_bound(rng: np.random.Generator, n: int) -> int:
    fails = 0
    spec = get_map("ricker", r=3.5)
    probe = probe_map(spec)
    starts = 10
    for s in range(starts):
        lo_b = float(rng.uniform(0.01, 0.5))
        hi_b = float(rng.uniform(lo_b, 0.95))
        if s % 2:
            x0 = float(probe.f2_m * rng.uniform(0.01, 0.99))
        else:
            x0 = float(probe.f_m * rng.uniform(1.01, 3.0))
        S0 = trap_bound(spec, probe, lo_b, hi_b, x0)
        m = n // starts
        al, el = 0.5 * (lo_b + hi_b), 0.5 * (hi_b - lo_b)
        res = simulate_batch(spec, np.full(m, al), np.full(m, el), NoiseSpec.uniform(),
                             np.full(m, x0), S0 + 50, SEED, [(s, i) for i in range(m)],
                             probe=probe)
        late = (res.steps_to_trap < 0) | (res.steps_to_trap > S0) | (res.trap_violations > 0)
        fails += int(np.count_nonzero(late))
    return fails


PROPERTIES = {
    "trap invariance": _prop_trap,
    "G ordering": _prop_ordering,
    "beta0 identity": _prop_beta0,
    "side alternation": _prop_sides,
    "trap_bound containment": _prop_trap_bound,
}


@check(13, "property suites", "structural invariants on 1000 randomized cases each", "properties")
def _c13() -> CheckResult:
    rng = stream(SEED, 13)
    counts = {k: fn(rng, 1000) for k, fn in PROPERTIES.items()}
    return CheckResult(all(v == 0 for v in counts.values()),
                       ", ".join(f"{k}: {v} failures" for k, v in counts.items()))


@check(14, "oscillating map divergence", "noisy collapse below the analytic gain", "exswitch", "slow")
def _c14() -> CheckResult:
    sw = get_map("exswitch")
    B = NoiseSpec.bernoulli()
    al = alpha_grid(0.10, 0.40, 0.005)
    det = bifurcation_sweep(sw, B, 0.0, al, transient=10_000 - 200, samples=200,
                            paths_per_alpha=40, master_seed=SEED)
    noisy = bifurcation_sweep(sw, B, 0.05, al, transient=10_000 - 200, samples=200,
                              paths_per_alpha=40, master_seed=SEED)
    t_det = collapse_threshold(al, det.rates)
    t_noisy = collapse_threshold(al, noisy.rates)
    a1, a2 = estimate_sides(sw)
    reg = region_raster(sw, B, alpha_grid(0.10, 0.45, 0.01), [0.05], L_pair=(2.0, 1.5),
                        sides=(a1, a2), paths=100, horizon=10_000, master_seed=SEED)
    dis = reg.disagreements()
    held = int(np.count_nonzero(reg.analytic == "holds"))
    ok = t_det is not None and abs(t_det - 0.266) <= 0.01 and not dis
    return CheckResult(ok, f"deterministic collapse {t_det}, noisy collapse {t_noisy} "
                           f"(analytic 0.266), {held} certified cells, {len(dis)} below 0.99")


def run(filter_text: str | None = None, echo: Callable[[str], None] | None = print) -> list[tuple[Check, CheckResult]]:
    """Run the registry (optionally only checks whose name, anchor or tags match)."""
    out = []
    for c in sorted(REGISTRY, key=lambda c: c.number):
        if filter_text:
            hay = " ".join((c.name, c.anchor) + c.tags).lower()
            if filter_text.lower() not in hay:
                continue
        res = c.run()
        out.append((c, res))
        if echo:
            echo(f"[{'PASS' if res.ok else 'FAIL'}] {c.number:2d} {c.name:<34} {res.seconds:6.1f}s  "
                 f"{res.detail}  ({c.anchor})")
    return out
