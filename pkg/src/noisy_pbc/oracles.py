"""Exact two-cycle analysis for piecewise-linear maps.

On a linear piece j, G(beta, x) = A_j(beta) x + B_j(beta) with A_j, B_j affine in
beta.  A two-cycle x -> y -> x with x on piece i and y on piece j solves
x (1 - A_i A_j) = A_j B_i + B_j, so x and y are ratios of low-degree
polynomials in beta and the set of gains admitting such a cycle is a union of
intervals whose ends are polynomial roots.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

from numpy.polynomial import Polynomial as P

from .maps import MapSpec, find_equilibrium

_EPS = 1e-12


@dataclass(frozen=True)
class _Piece:
    lo: float
    hi: float
    A: P
    B: P


def _pieces(spec: MapSpec) -> list[_Piece]:
    if not spec.segments:
        raise ValueError(f"{spec.name} is not piecewise linear")
    out = []
    for s in spec.segments:
        out.append(_Piece(s.lo, s.hi, P([s.slope, 1 - s.slope]), P([s.intercept, -s.intercept])))
    out.append(_Piece(spec.segments[-1].hi, math.inf, P([0.0, 1.0]), P([spec.tail, -spec.tail])))
    return out


def _local_threshold(spec: MapSpec, K: float) -> float:
    """Gain at which the one-sided slopes at K multiply to one."""
    left = right = None
    for s in spec.segments:
        if s.lo < K <= s.hi:
            left = -s.slope
        if s.lo <= K < s.hi:
            right = -s.slope
    u, v = left, right
    return (u * v - 1) / ((u + 1) * (v + 1))


@dataclass(frozen=True)
class TwoCycle:
    beta: float
    x: float
    y: float


def _cycle_at(pi: _Piece, pj: _Piece, beta: float, K: float) -> TwoCycle | None:
    d = 1.0 - pi.A(beta) * pj.A(beta)
    if abs(d) < _EPS:
        return None
    x = (pj.A(beta) * pi.B(beta) + pj.B(beta)) / d
    y = pi.A(beta) * x + pi.B(beta)
    tol = 1e-9 * max(1.0, K)
    if not (pi.lo - tol <= x <= pi.hi + tol and pj.lo - tol <= y <= pj.hi + tol):
        return None
    if not (x < K - tol and y > K + tol):
        return None
    return TwoCycle(beta, float(x), float(y))


def _critical_gains(pi: _Piece, pj: _Piece, K: float) -> list[float]:
    D = 1 - pi.A * pj.A
    N = pj.A * pi.B + pj.B
    Y = pi.A * N + pi.B * D  # y * D
    polys = [D, N - K * D, Y - K * D]
    for bound in (pi.lo, pi.hi):
        if math.isfinite(bound):
            polys.append(N - bound * D)
    for bound in (pj.lo, pj.hi):
        if math.isfinite(bound):
            polys.append(Y - bound * D)
    roots = []
    for p in polys:
        p = p.trim(tol=1e-15)
        if p.degree() < 1:
            continue
        for r in p.roots():
            if abs(r.imag) < 1e-12 and 0.0 <= r.real < 1.0:
                roots.append(float(r.real))
    return roots


def two_cycles(spec: MapSpec, beta: float) -> list[TwoCycle]:
    """All two-cycles {x < K < y} of G(beta, .), found piece pair by piece pair."""
    K, _ = find_equilibrium(spec)
    ps = _pieces(spec)
    out = []
    for pi, pj in itertools.product(ps, ps):
        c = _cycle_at(pi, pj, beta, K)
        if c is not None:
            out.append(c)
    return out


def exact_beta_star(spec: MapSpec) -> float:
    """Exact smallest gain above which G(beta, .) has no two-cycle.

    Combines the local slope threshold at K with the supremum of gains for
    which some piece pair carries a genuine two-cycle.
    """
    K, _ = find_equilibrium(spec)
    ps = _pieces(spec)
    best = max(0.0, _local_threshold(spec, K))
    for pi, pj in itertools.product(ps, ps):
        if pi.lo >= K or pj.hi <= K:
            continue
        crit = sorted(set([0.0, 1.0 - 1e-12] + _critical_gains(pi, pj, K)))
        probes = list(crit) + [0.5 * (a + b) for a, b in zip(crit, crit[1:])]
        for b in probes:
            if b > best and _cycle_at(pi, pj, b, K) is not None:
                best = b
        # a feasible open interval ending at a critical gain reaches that gain
        for a, b in zip(crit, crit[1:]):
            if b > best and _cycle_at(pi, pj, 0.5 * (a + b), K) is not None:
                best = b
    return best
