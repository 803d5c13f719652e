"""Stability constants, noise-region conditions, two-cycle search and envelope certificates.

Notation: for a one-sided constant L, ``script_L(L, b) = (1 - b) L - b`` is the
contraction factor of the controlled map G(b, x) = (1 - b) f(x) + b x on that
side of K.  ``psi(u, v)`` is the gain at which the two one-sided factors
multiply to one.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .maps import (
    GRID,
    MapProbe,
    MapSpec,
    SingularityError,
    SmoothnessError,
    controlled,
    derivative_at,
    estimate_lipschitz,
    probe_map,
)
from .noise import InfeasibleError, NoiseSpec, expected_log_L0, expected_log_pair, mathcal_V

__all__ = [
    "Verdict", "ControlSpec", "AdmissibilityError", "LocallyStableError", "NotApplicableError",
    "CertificateError", "Interval", "psi", "script_L", "beta0", "alpha0", "bernoulli_region",
    "uniform_condition", "mathcal_V", "two_cycle_margin", "in_S", "beta_star", "EnvelopeSpec",
    "build_envelope", "check_envelope", "multi_interval_certificate", "refine_alpha",
    "right_lipschitz_rule", "check_derivative_envelope", "envelope_values", "construct_symmetric_gain",
    "sides_bound", "estimate_sides", "local_constants", "bernoulli_example_pair", "bernoulli_example_gain",
    "analytic_verdict", "StabilityReport", "build_report",
]


class Verdict(str, enum.Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INFEASIBLE = "infeasible"


class AdmissibilityError(InfeasibleError):
    """Control pair outside 0 <= alpha - ell, alpha + ell < 1."""


class LocallyStableError(ValueError):
    """K is already stable without control; the requested gain is meaningless."""


class NotApplicableError(ValueError):
    pass


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class ControlSpec:
    alpha: float
    ell: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise AdmissibilityError(f"alpha={self.alpha} outside [0, 1)")
        if self.ell < 0:
            raise AdmissibilityError(f"ell={self.ell} must be non-negative")
        if self.alpha - self.ell < 0:
            raise AdmissibilityError(f"alpha - ell = {self.alpha - self.ell:g} < 0")
        if self.alpha + self.ell >= 1:
            raise AdmissibilityError(f"alpha + ell = {self.alpha + self.ell:g} >= 1")

    @property
    def beta_range(self) -> tuple[float, float]:
        return self.alpha - self.ell, self.alpha + self.ell

    @staticmethod
    def admissible(alpha: float, ell: float) -> bool:
        return 0 <= alpha < 1 and ell >= 0 and alpha - ell >= 0 and alpha + ell < 1


@dataclass(frozen=True)
class Interval:
    """Open interval (lo, hi); empty when lo >= hi."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    def __contains__(self, x: float) -> bool:
        return self.lo < x < self.hi

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


# ---------------------------------------------------------------------------
# closed-form constants


def psi(u: float, v: float) -> float:
    """(uv - 1) / ((u + 1)(v + 1))."""
    if u <= -1 or v <= -1:
        raise ValueError(f"psi needs u, v > -1 (got {u}, {v})")
    return (u * v - 1.0) / ((u + 1.0) * (v + 1.0))


def script_L(L, beta):
    return (1.0 - beta) * L - beta


def beta0(L_minus: float, L_plus: float) -> float:
    """Smallest root of script_L(L-, b) * script_L(L+, b) = 1."""
    if L_minus * L_plus <= 1:
        raise LocallyStableError(f"L- L+ = {L_minus * L_plus:g} <= 1: locally stable already")
    b = psi(L_minus, L_plus)
    resid = script_L(L_minus, b) * script_L(L_plus, b) - 1.0
    if abs(resid) > 1e-12:
        raise ArithmeticError(f"beta0 residual {resid:g}")
    return b


def alpha0(L0: float) -> float:
    """(L0 - 1) / (L0 + 1); zero at the stability boundary L0 = 1."""
    if L0 < 1:
        raise LocallyStableError(f"L0 = {L0} < 1: K is stable without control")
    return (L0 - 1.0) / (L0 + 1.0)


def bernoulli_region(L0: float, alpha: float) -> Interval:
    """Open interval of noise amplitudes ell for which two-point noise stabilises locally.

    The squared bounds are (c - a)^2 - 1/(L0+1)^2 < ell^2 < min{(c - a)^2, a}
    with c = L0/(L0+1); the result is further capped by ell < min{a, 1 - a}.
    """
    c = L0 / (L0 + 1.0)
    gap = c - alpha
    if gap <= 0:
        return Interval(0.0, 0.0)
    lo2 = gap * gap - 1.0 / (L0 + 1.0) ** 2
    hi2 = min(gap * gap, alpha)
    lo = math.sqrt(lo2) if lo2 > 0 else 0.0
    hi = math.sqrt(hi2) if hi2 > 0 else 0.0
    hi = min(hi, alpha, 1.0 - alpha)
    return Interval(lo, hi)


@dataclass(frozen=True)
class UniformCheck:
    verdict: Verdict
    lhs: float
    rhs: float
    expected_log: float  # exact value by quadrature; nan when infeasible

    @property
    def holds(self) -> bool:
        return self.verdict is Verdict.HOLDS


def uniform_condition(L0: float, alpha: float, ell: float) -> UniformCheck:
    """Sufficient condition ln L(a) < (1/6) [ell (L0+1) / L(a)]^2 for uniform noise.

    The exact expected log is computed alongside.
    """
    La = script_L(L0, alpha)
    if not (La > 0 and alpha + ell < L0 / (L0 + 1)):
        return UniformCheck(Verdict.INFEASIBLE, math.nan, math.nan, math.nan)
    lhs = math.log(La)
    rhs = (ell * (L0 + 1) / La) ** 2 / 6.0
    exact = expected_log_L0(L0, alpha, ell, NoiseSpec.uniform())
    return UniformCheck(Verdict.HOLDS if lhs < rhs else Verdict.FAILS, lhs, rhs, exact)


# ---------------------------------------------------------------------------
# two-cycle search


def _side_grids(spec: MapSpec, probe: MapProbe, n: int) -> tuple[np.ndarray, np.ndarray]:
    K, lo, hi = probe.K, probe.f2_m, probe.f_m
    extra = np.array([b for b in spec.breakpoints] + [probe.x_max])
    left = np.concatenate([np.linspace(lo, K, n + 2)[1:-1], extra[(extra > lo) & (extra < K)]])
    right = np.concatenate([np.linspace(K, hi, n + 2)[1:-1], extra[(extra > K) & (extra < hi)]])
    return np.sort(left), np.sort(right)


def two_cycle_margin(spec: MapSpec, probe: MapProbe | None, beta: float, n: int = GRID,
                     refine: bool = True, return_witness: bool = False):
    """Worst-case distance from having a two-cycle at gain ``beta``.

    Takes the minimum of G^2(x) - x over (f2_m, K) and x - G^2(x) over (K, f_m).
    A positive value means G(beta, .) has no two-cycle around K at grid
    resolution.  With ``return_witness`` the worst x is returned too.
    """
    probe = probe or probe_map(spec)
    left, right = _side_grids(spec, probe, n)

    def g2(x):
        return controlled(spec, beta, controlled(spec, beta, x))

    ml = g2(left) - left
    mr = right - g2(right)
    il, ir = int(np.argmin(ml)), int(np.argmin(mr))
    if ml[il] <= mr[ir]:
        xs, ms, i, sign = left, ml, il, 1.0
    else:
        xs, ms, i, sign = right, mr, ir, -1.0
    best_x, best = float(xs[i]), float(ms[i])
    if refine and 0 < i < len(xs) - 1:
        a, b = float(xs[i - 1]), float(xs[i + 1])
        res = minimize_scalar(lambda t: sign * (float(g2(np.asarray(t))) - t),
                              bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        if res.fun < best:
            best_x, best = float(res.x), float(res.fun)
    if return_witness:
        return best, best_x
    return best


def in_S(spec: MapSpec, probe: MapProbe | None, beta: float, n: int = GRID) -> bool:
    """Membership of ``beta`` in the set of gains without a two-cycle."""
    probe = probe or probe_map(spec)
    return two_cycle_margin(spec, probe, beta, n) > -1e-12 * max(1.0, probe.K)


def beta_star(spec: MapSpec, probe: MapProbe | None = None, tol: float = 1e-4,
              n: int = GRID, mode: str = "bisect", scan_step: float = 1e-3) -> float:
    """Smallest gain beyond which G(beta, .) has no two-cycle.

    ``mode="bisect"`` assumes the no-two-cycle set is an up-set in beta;
    ``mode="scan"`` walks a grid from the top instead and is the fallback check.
    """
    probe = probe or probe_map(spec)
    if in_S(spec, probe, 0.0, n):
        return 0.0
    top = 1.0 - 1e-9
    if not in_S(spec, probe, top, n):
        raise CertificateError(f"{spec.name}: two-cycle persists as beta -> 1")
    if mode == "scan":
        betas = np.arange(top, 0.0, -scan_step)
        last_ok = top
        for b in betas:
            if not in_S(spec, probe, float(b), n):
                return last_ok
            last_ok = float(b)
        return 0.0
    lo, hi = 0.0, top
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if in_S(spec, probe, mid, n):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# envelopes


@dataclass(frozen=True)
class EnvelopeSpec:
    """Piecewise-linear decreasing involution phi around K.

    ``a`` runs K = a0 > a1 > ... > am and ``b`` runs K = b0 < b1 < ... < bm;
    phi maps [a_{i+1}, a_i] onto [b_i, b_{i+1}] with slope -C_minus[i].
    """

    K: float
    a: tuple[float, ...]
    b: tuple[float, ...]
    C_minus: tuple[float, ...]
    C_plus: tuple[float, ...]

    @property
    def domain(self) -> tuple[float, float]:
        return self.a[-1], self.b[-1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a = np.array(self.a)
        b = np.array(self.b)
        cm = np.array(self.C_minus)
        cp = np.array(self.C_plus)
        m = len(cm)
        # left piece i covers [a_{i+1}, a_i)
        il = np.clip(np.searchsorted(-a, -x, side="left") - 1, 0, m - 1)
        left = -cm[il] * (x - a[il]) + b[il]
        ir = np.clip(np.searchsorted(b, x, side="left") - 1, 0, m - 1)
        right = -cp[ir] * (x - b[ir]) + a[ir]
        out = np.where(x <= self.K, left, right)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return asdict(self)


def build_envelope(a: Sequence[float], C_minus: Sequence[float]) -> EnvelopeSpec:
    """Envelope from breakpoints ``a`` (starting at K, decreasing) and left slopes."""
    a = tuple(float(v) for v in a)
    C_minus = tuple(float(c) for c in C_minus)
    if len(a) < 2 or len(C_minus) != len(a) - 1:
        raise ValueError("need a0 = K, a1, ..., am and m slopes")
    if any(not (x > y) for x, y in zip(a, a[1:])) or a[-1] <= 0:
        raise ValueError("breakpoints must decrease strictly from K and stay positive")
    if any(c <= 0 for c in C_minus):
        raise ValueError("slopes must be positive")
    b = [a[0]]
    for i, c in enumerate(C_minus):
        b.append(c * (a[i] - a[i + 1]) + b[i])
    env = EnvelopeSpec(a[0], a, tuple(b), C_minus, tuple(1.0 / c for c in C_minus))
    xs = np.linspace(a[-1], b[-1], 2001)
    back = env(env(xs))
    if np.max(np.abs(back - xs)) > 1e-10 * max(1.0, b[-1]):
        raise ArithmeticError("envelope is not an involution")
    return env


@dataclass(frozen=True)
class EnvelopeCheck:
    ok: bool
    margin: float
    witness: float | None
    grid: int

    def __bool__(self) -> bool:
        return self.ok


def check_envelope(g: Callable[[np.ndarray], np.ndarray], env: EnvelopeSpec,
                   interval: tuple[float, float], n: int = GRID) -> EnvelopeCheck:
    """Grid check that ``env`` separates ``g`` from its inverse on ``interval``.

    Requires phi > g and g > x on (d1, K), phi < g and 0 < g < x on (K, d2).
    The margin is the smallest slack over all four inequalities.
    """
    d1, d2 = interval
    K = env.K
    if not d1 < K < d2:
        raise ValueError("interval must contain K")
    xl = np.linspace(d1, K, n + 2)[1:-1]
    xr = np.linspace(K, d2, n + 2)[1:-1]
    gl, gr = g(xl), g(xr)
    pl, pr = env(xl), env(xr)
    slack = [
        (pl - gl, xl),
        (gl - xl, xl),
        (gr - pr, xr),
        (xr - gr, xr),
        (gr, xr),
    ]
    worst, where = math.inf, None
    for s, xs in slack:
        i = int(np.argmin(s))
        if s[i] < worst:
            worst, where = float(s[i]), float(xs[i])
    ok = worst > 0
    return EnvelopeCheck(ok, worst, None if ok else where, n)


@dataclass(frozen=True)
class MultiCertificate:
    alpha0: float
    certified: bool
    psi_values: tuple[float, ...]
    kept: tuple[float, ...]  # breakpoints retained after dropping non-increasing b steps
    envelope: EnvelopeSpec | None
    checks: dict[float, EnvelopeCheck] = field(default_factory=dict)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "certified": self.certified,
            "psi_values": list(self.psi_values),
            "partition": list(self.kept),
            "envelope": self.envelope.to_dict() if self.envelope else None,
            "checks": {str(k): {"ok": v.ok, "margin": v.margin, "witness": v.witness, "grid": v.grid}
                       for k, v in self.checks.items()},
            "reason": self.reason,
        }


CERT_TOL = 1e-12


def multi_interval_certificate(spec: MapSpec, partition: Sequence[float],
                               L_minus: Sequence[float], L_plus: Sequence[float],
                               check_alphas: Sequence[float] | None = None,
                               n: int = GRID) -> MultiCertificate:
    """Global-stability gain from one-sided constants on nested intervals around K.

    ``partition`` is K = a0 > a1 > ... > am; ``L_minus[i]``/``L_plus[i]`` hold
    on the i-th piece.  Certified when Psi(L0-, L0+) dominates every later
    Psi(Li-, Li+).  On success the envelope built from slopes script_L(Li-, alpha0)
    is grid-checked against G(alpha, .) for each alpha in ``check_alphas``
    (default: alpha0 + 0.01).
    """
    a = [float(v) for v in partition]
    m = len(a) - 1
    if len(L_minus) != m or len(L_plus) != m:
        raise ValueError("need one (L-, L+) pair per partition piece")
    if L_minus[0] * L_plus[0] <= 1:
        raise LocallyStableError("L0- L0+ <= 1")
    al0 = psi(L_minus[0], L_plus[0])
    psis = tuple(psi(lm, lp) for lm, lp in zip(L_minus[1:], L_plus[1:]))
    # drop a_i whose left slope at alpha0 would make b decrease
    kept_a, slopes = [a[0]], []
    for i in range(m):
        c = script_L(L_minus[i], al0)
        if c <= 0:
            continue
        slopes.append(c)
        kept_a.append(a[i + 1])
    certified = all(al0 >= p - CERT_TOL for p in psis)
    if not certified:
        worst = max(psis)
        return MultiCertificate(al0, False, psis, tuple(kept_a), None,
                                reason=f"alpha0={al0:.6g} < max Psi={worst:.6g}")
    try:
        env = build_envelope(kept_a, slopes)
    except (ValueError, ArithmeticError) as exc:
        return MultiCertificate(al0, False, psis, tuple(kept_a), None, reason=str(exc))
    probe = probe_map(spec)
    if env.b[-1] > 1e6 * max(1.0, probe.f_m):
        return MultiCertificate(al0, False, psis, tuple(kept_a), env,
                                reason="b-recursion leaves the map's range")
    alphas = list(check_alphas) if check_alphas is not None else [min(al0 + 0.01, 0.999)]
    checks = {}
    for al in alphas:
        checks[float(al)] = check_envelope(lambda x, al=al: controlled(spec, al, x), env,
                                           env.domain, n)
    ok = all(c.ok for c in checks.values())
    return MultiCertificate(al0, ok, psis, tuple(kept_a), env, checks,
                            reason="" if ok else "envelope grid check failed")


def right_lipschitz_rule(spec: MapSpec, probe: MapProbe | None = None,
                         n: int = GRID) -> Callable[[float], float]:
    """z -> largest decreasing rate of f on [z, f_m] (grid difference quotients)."""
    probe = probe or probe_map(spec)
    hi = probe.f_m
    # breakpoints are kept so that piecewise-linear slopes are read exactly
    xs = np.unique(np.concatenate([np.linspace(probe.K, hi, n + 1),
                                   [b for b in spec.breakpoints if probe.K < b < hi]]))
    fx = spec.rule(xs)
    rates = (fx[:-1] - fx[1:]) / np.diff(xs)
    # suffix maxima so each query is a lookup
    suffix = np.maximum.accumulate(rates[::-1])[::-1]

    def L_plus(z: float) -> float:
        if z >= hi:
            return 0.0
        i = int(np.searchsorted(xs, z, side="right") - 1)
        i = min(max(i, 0), len(rates) - 1)
        return float(suffix[i])

    return L_plus


@dataclass(frozen=True)
class RefinedGain:
    alpha_bar: float
    alphas: tuple[float, ...]
    b: tuple[float, ...]


def refine_alpha(spec: MapSpec, partition: Sequence[float], L_minus: Sequence[float],
                 L_plus_tail: Callable[[float], float] | None = None,
                 n: int = GRID) -> RefinedGain:
    """Raise the gain until each outer piece is covered, one piece at a time.

    alpha_0 = Psi(L0-, L+(K)); for i >= 1, b_i = max of G(alpha_{i-1}, .) over
    [a_i, K] and alpha_i = max(alpha_{i-1}, Psi(Li-, L+(b_i))).
    """
    probe = probe_map(spec)
    a = [float(v) for v in partition]
    m = len(a) - 1
    if len(L_minus) != m:
        raise ValueError("need one L- per partition piece")
    Lp = L_plus_tail or right_lipschitz_rule(spec, probe, n)
    al = psi(L_minus[0], Lp(probe.K))
    alphas, bs = [al], [probe.K]
    for i in range(1, m):
        xs = np.linspace(a[i], probe.K, n + 1)
        bi = float(np.max(controlled(spec, al, xs)))
        if bi > probe.f_m:
            raise CertificateError(f"b_{i} = {bi:g} exceeds f_m = {probe.f_m:g}")
        al = max(al, psi(L_minus[i], Lp(bi)))
        alphas.append(al)
        bs.append(bi)
    return RefinedGain(max(alphas), tuple(alphas), tuple(bs))


# ---------------------------------------------------------------------------
# smooth maps: derivative envelope


def envelope_values(spec: MapSpec, alpha: float, xs: np.ndarray) -> np.ndarray:
    """envel(x) = Psi(-f'(G(alpha, x)), -f'(x)) on ``xs``."""
    out = np.empty(len(xs))
    for j, x in enumerate(xs):
        gx = float(controlled(spec, alpha, x))
        u = -derivative_at(spec, gx, 1)
        v = -derivative_at(spec, float(x), 1)
        if u <= -1 or v <= -1:
            raise NotApplicableError(f"f' >= 1 near x={x:g}")
        out[j] = psi(u, v)
    return out


@dataclass(frozen=True)
class DerivativeEnvelopeCheck:
    ok: bool
    alpha0: float
    max_envel: float
    argmax: float
    xs: np.ndarray = field(repr=False)
    envel: np.ndarray = field(repr=False)


def check_derivative_envelope(spec: MapSpec, probe: MapProbe | None = None, n: int = 1000) -> DerivativeEnvelopeCheck:
    """alpha0 > envel(x) on a grid of [x_max, K) for a smooth map."""
    probe = probe or probe_map(spec)
    if probe.L0 is None:
        raise NotApplicableError(f"{spec.name} is not smooth on [x_max, K]")
    if any(probe.x_max <= b <= probe.K for b in spec.breakpoints):
        raise NotApplicableError(f"{spec.name} has a breakpoint in [x_max, K]")
    xs = np.linspace(probe.x_max, probe.K, n + 1)[:-1]
    try:
        if np.any(np.array([derivative_at(spec, float(x), 1) for x in xs]) >= 1):
            raise NotApplicableError("f' >= 1 on [x_max, K)")
        al0 = alpha0(probe.L0)
        env = envelope_values(spec, al0, xs)
    except (SmoothnessError, SingularityError) as exc:
        raise NotApplicableError(str(exc)) from exc
    i = int(np.argmax(env))
    return DerivativeEnvelopeCheck(bool(env[i] < al0), al0, float(env[i]), float(xs[i]), xs, env)


# ---------------------------------------------------------------------------
# noisy gains


def construct_symmetric_gain(L0: float, noise: NoiseSpec, shrink: float = 0.9) -> ControlSpec:
    """A stabilising noisy pair (alpha, ell) with alpha below the deterministic threshold."""
    if L0 <= 1:
        raise LocallyStableError("L0 <= 1")
    mu2 = noise.mu2
    a0 = alpha0(L0)
    bound = min(2.0 / mu2, 1.0 / (L0 + 1), (L0 - 1) / ((1 + mu2 / 2) * (L0 + 1)))
    ell0 = shrink * bound
    alpha = a0 - 0.25 * ell0 * ell0 * mu2
    top = min(alpha, 1.0 / (L0 + 1))
    if not ell0 < top:
        raise CertificateError(f"empty ell interval ({ell0:g}, {top:g})")
    ell = 0.5 * (ell0 + top)
    ctl = ControlSpec(alpha, ell)
    if not alpha < a0:
        raise CertificateError("alpha not below alpha0")
    if not a0 < alpha + ell < L0 / (L0 + 1):
        raise CertificateError("alpha + ell outside (alpha0, L0/(L0+1))")
    if not expected_log_L0(L0, alpha, ell, noise) < 0:
        raise CertificateError("expected log is not negative")
    return ctl


def sides_bound(a1: float, a2: float) -> float:
    """Largest alpha + ell keeping consecutive states on opposite sides of K."""
    def frac(a):
        return 1.0 if math.isinf(a) else a / (a + 1.0)
    return min(frac(a1), frac(a2))


def estimate_sides(spec: MapSpec, probe: MapProbe | None = None, theta: float | None = None,
                   n: int = GRID) -> tuple[float, float]:
    """Grid infima a1, a2 of (f(x) - K)/(K - x) and (K - f(x))/(x - K) within theta of K."""
    probe = probe or probe_map(spec)
    K = probe.K
    theta = theta if theta is not None else 0.05 * K
    xl = np.linspace(K - theta, K, n + 2)[1:-1]
    xr = np.linspace(K, K + theta, n + 2)[1:-1]
    a1 = float(np.min((spec.rule(xl) - K) / (K - xl)))
    a2 = float(np.min((K - spec.rule(xr)) / (xr - K)))
    return a1, a2


def local_constants(spec: MapSpec, probe: MapProbe | None = None, theta: float | None = None,
                    n: int = GRID) -> tuple[float, float]:
    """One-sided constants (L-, L+) restricted to (K - theta, K) and (K, K + theta)."""
    probe = probe or probe_map(spec)
    K = probe.K
    theta = theta if theta is not None else 0.02 * K
    return estimate_lipschitz(spec, probe, left=(K - theta, K), right=(K, K + theta), n=n)


def bernoulli_example_pair(L0: float) -> tuple[float, float]:
    """alpha = (L0 - 1 - (L0-2)/2)/(L0+1), ell = ((L0-2)/2 + 1/2)/(L0+1)."""
    alpha = (L0 - 1 - (L0 - 2) / 2) / (L0 + 1)
    ell = ((L0 - 2) / 2 + 0.5) / (L0 + 1)
    return alpha, ell


def bernoulli_example_gain(L0: float) -> ControlSpec:
    """The explicit two-point-noise pair, validated against the Bernoulli region.

    The pair lies strictly inside the region only for 2 < L0 < 2.5 (at 2.5 it
    sits on the lower boundary); outside that range a CertificateError is raised.
    """
    if L0 <= 2:
        raise ValueError(f"L0 = {L0} <= 2 is outside the formula's range")
    alpha, ell = bernoulli_example_pair(L0)
    if not alpha < alpha0(L0):
        raise CertificateError("alpha not below alpha0")
    if ell not in bernoulli_region(L0, alpha):
        raise CertificateError(
            f"pair (alpha={alpha:.6g}, ell={ell:.6g}) is not inside the Bernoulli region for L0={L0}")
    return ControlSpec(alpha, ell)


# ---------------------------------------------------------------------------
# combined verdict for a raster cell


def analytic_verdict(alpha: float, ell: float, noise: NoiseSpec, beta_s: float, *,
                     L0: float | None = None, L_pair: tuple[float, float] | None = None,
                     sides: tuple[float, float] | None = None) -> Verdict:
    """Whether the sufficient conditions certify almost-sure global stability.

    HOLDS when every gain in the noise range already exceeds beta_*; otherwise
    requires alpha + ell > beta_* and ell < min(alpha, 1 - alpha) together with a
    negative expected log at K (from L0 or the one-sided pair).  FAILS means
    "not certified".
    """
    if not ControlSpec.admissible(alpha, ell):
        return Verdict.INFEASIBLE
    if alpha - ell > beta_s:
        return Verdict.HOLDS
    if ell == 0 or not (alpha + ell > beta_s and ell < min(alpha, 1 - alpha)):
        return Verdict.FAILS
    try:
        if L0 is not None:
            if noise.kind == "bernoulli":
                return Verdict.HOLDS if ell in bernoulli_region(L0, alpha) else Verdict.FAILS
            if not alpha + ell < L0 / (L0 + 1):
                return Verdict.FAILS
            return Verdict.HOLDS if expected_log_L0(L0, alpha, ell, noise) < 0 else Verdict.FAILS
        if L_pair is None:
            raise ValueError("need L0 or (L_minus, L_plus)")
        if sides is not None and alpha + ell > sides_bound(*sides):
            return Verdict.FAILS
        val = expected_log_pair(L_pair[0], L_pair[1], alpha, ell, noise)
        return Verdict.HOLDS if val < 0 else Verdict.FAILS
    except InfeasibleError:
        return Verdict.FAILS


# ---------------------------------------------------------------------------
# report


@dataclass
class StabilityReport:
    map: str
    probe: dict
    constants: dict
    verdicts: dict = field(default_factory=dict)
    certificates: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "map": self.map,
            "probe": self.probe,
            "constants": self.constants,
            "verdicts": self.verdicts,
            "certificates": self.certificates,
            "witnesses": self.witnesses,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=kw.pop("indent", 2), default=_jsonable, **kw)


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, enum.Enum):
        return o.value
    raise TypeError(f"not serialisable: {type(o)}")


# partitions and per-piece constants for maps with a known multi-interval structure
PARTITIONS: dict[str, tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]]] = {
    "exglob": ((32, 31, 29, 28), (3, 5, 6), (2, 1.4, 1.2)),
    "exnotglob": ((32, 31, 28), (3, 5), (2, 1.7)),
}


def two_cycle_witness(spec: MapSpec, beta: float, x: float) -> dict | None:
    """(x, G(x)) if x is a genuine two-cycle point at ``beta``, else None."""
    y = float(controlled(spec, beta, x))
    back = float(controlled(spec, beta, y))
    if abs(back - x) <= 1e-8 and abs(y - x) > 1e-8:
        return {"beta": beta, "x": x, "Gx": y, "residual": abs(back - x)}
    return None


def build_report(spec: MapSpec, noise: NoiseSpec | None = None,
                 control: ControlSpec | None = None) -> StabilityReport:
    """Collect every applicable constant and certificate for ``spec``."""
    probe = probe_map(spec)
    c: dict = {}
    c["beta0"] = beta0(probe.L_minus, probe.L_plus)
    c["psi_L"] = c["beta0"]
    c["alpha0"] = alpha0(probe.L0) if probe.L0 is not None else None
    c["beta_star"] = beta_star(spec, probe)
    a1, a2 = estimate_sides(spec, probe)
    lpair = local_constants(spec, probe)
    c["L_local"] = {"L_minus": lpair[0], "L_plus": lpair[1], "psi": psi(*lpair)}
    c["sides"] = {"a1": a1, "a2": a2, "bound": sides_bound(a1, a2)}
    rep = StabilityReport(spec.describe(), probe.to_dict(), c)

    if spec.name in PARTITIONS:
        part, lm, lp = PARTITIONS[spec.name]
        cert = multi_interval_certificate(spec, part, lm, lp)
        rep.certificates["multi_interval"] = cert.to_dict()
        if not cert.certified:
            ref = refine_alpha(spec, part, lm)
            rep.certificates["refined_alpha"] = {"alpha_bar": ref.alpha_bar,
                                                 "alphas": list(ref.alphas), "b": list(ref.b)}
            m, x = two_cycle_margin(spec, probe, cert.alpha0, return_witness=True)
            rep.witnesses.append({"beta": cert.alpha0, "x": x, "margin": m})
    if probe.L0 is not None:
        try:
            chk = check_derivative_envelope(spec, probe)
            rep.certificates["derivative_envelope"] = {"ok": chk.ok, "alpha0": chk.alpha0,
                                               "max_envel": chk.max_envel, "argmax": chk.argmax}
        except NotApplicableError as exc:
            rep.certificates["derivative_envelope"] = {"ok": None, "reason": str(exc)}

    if noise is not None:
        v: dict = {"noise": noise.to_config()}
        if probe.L0 is not None and probe.L0 > 1:
            try:
                g = construct_symmetric_gain(probe.L0, noise)
                v["constructed_gain"] = {"alpha": g.alpha, "ell": g.ell}
            except (CertificateError, InfeasibleError) as exc:
                v["constructed_gain"] = {"error": str(exc)}
        if control is not None:
            v["control"] = {"alpha": control.alpha, "ell": control.ell}
            v["verdict"] = analytic_verdict(
                control.alpha, control.ell, noise, c["beta_star"], L0=probe.L0,
                L_pair=None if probe.L0 is not None else lpair,
                sides=(a1, a2)).value
            if probe.L0 is not None:
                try:
                    v["expected_log_L0"] = expected_log_L0(probe.L0, control.alpha, control.ell, noise)
                except InfeasibleError:
                    v["expected_log_L0"] = None
            try:
                v["expected_log_pair"] = expected_log_pair(lpair[0], lpair[1],
                                                           control.alpha, control.ell, noise)
            except InfeasibleError:
                v["expected_log_pair"] = None
        rep.verdicts = v
    return rep
