"""Bounded symmetric noise laws, reproducible streams, and expected-log functionals.

Noise xi lives in [-1, 1], is symmetric, and puts mass arbitrarily close to 1.
All sampling goes through ``uniform01`` draws from a Philox stream keyed by
``(master_seed, stream_index)``, so a path's noise does not depend on how many
other paths run or in which order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

KINDS = ("bernoulli", "uniform", "discrete")


class NoiseError(ValueError):
    pass


class InfeasibleError(ValueError):
    """A positivity precondition of an expected-log functional is violated.

    Distinct from numerical failure: callers turn it into an INFEASIBLE verdict.
    """


@dataclass(frozen=True)
class NoiseSpec:
    """Symmetric law on [-1, 1].

    For ``kind="discrete"``, ``atoms`` lists ``(u, mass)`` pairs with ``u`` in
    (0, 1]; each atom is mirrored to -u with the same mass, so the masses must
    sum to 1/2.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NoiseError(f"unknown noise kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "discrete":
            if not self.atoms:
                raise NoiseError("discrete noise needs atoms")
            for u, m in self.atoms:
                if not (0 < u <= 1):
                    raise NoiseError(f"atom {u} outside (0, 1]")
                if not m > 0:
                    raise NoiseError(f"atom {u} has non-positive mass {m}")
            total = sum(m for _, m in self.atoms)
            if abs(2 * total - 1) > 1e-12:
                raise NoiseError(f"mirrored atom masses sum to {2 * total}, not 1")
            if not any(u == 1.0 for u, _ in self.atoms):
                # mass in (1 - eps, 1] for every eps requires an atom at 1
                raise NoiseError("discrete noise needs an atom at u = 1")
        elif self.atoms:
            raise NoiseError(f"{self.kind} noise takes no atoms")

    @classmethod
    def bernoulli(cls) -> "NoiseSpec":
        return cls("bernoulli")

    @classmethod
    def uniform(cls) -> "NoiseSpec":
        return cls("uniform")

    @classmethod
    def discrete(cls, atoms: Iterable[tuple[float, float]]) -> "NoiseSpec":
        return cls("discrete", tuple((float(u), float(m)) for u, m in atoms))

    @classmethod
    def from_config(cls, cfg: dict | str) -> "NoiseSpec":
        if isinstance(cfg, str):
            return cls(cfg)
        atoms = cfg.get("atoms") or ()
        return cls(cfg["kind"], tuple((float(u), float(m)) for u, m in atoms))

    def to_config(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.atoms:
            out["atoms"] = [list(a) for a in self.atoms]
        return out

    @property
    def mu2(self) -> float:
        if self.kind == "bernoulli":
            return 1.0
        if self.kind == "uniform":
            return 1.0 / 3.0
        return sum(2 * u * u * m for u, m in self.atoms)

    def support_points(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(values, probabilities) for atomic laws, None for the uniform law."""
        if self.kind == "bernoulli":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.kind == "discrete":
            us = np.array([u for u, _ in self.atoms])
            ms = np.array([m for _, m in self.atoms])
            return np.concatenate([-us[::-1], us]), np.concatenate([ms[::-1], ms])
        return None


# ---------------------------------------------------------------------------
# streams and sampling


def stream(master_seed: int, *index: int) -> np.random.Generator:
    """Independent Philox generator for ``(master_seed, *index)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(i) for i in index))
    return np.random.Generator(np.random.Philox(ss))


def transform(noise: NoiseSpec, u: np.ndarray) -> np.ndarray:
    """Map uniform(0,1) draws to draws of ``noise``."""
    if noise.kind == "bernoulli":
        return np.where(u < 0.5, -1.0, 1.0)
    if noise.kind == "uniform":
        return 2.0 * u - 1.0
    vals, probs = noise.support_points()
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return vals[np.searchsorted(cdf, u, side="right").clip(max=len(vals) - 1)]


def sample(noise: NoiseSpec, rng: np.random.Generator, size: int | None = None):
    u = rng.random(size)
    out = transform(noise, np.asarray(u))
    return float(out) if size is None else out


# ---------------------------------------------------------------------------
# expected-log functionals


def _adaptive_simpson(f: Callable[[float], float], a: float, b: float, tol: float,
                      max_depth: int = 50) -> float:
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def _expect(noise: NoiseSpec, g: Callable[[float], float], tol: float = 1e-13) -> float:
    """E g(xi) for the law ``noise``."""
    pts = noise.support_points()
    if pts is None:
        return 0.5 * _adaptive_simpson(g, -1.0, 1.0, tol)
    vals, probs = pts
    return float(sum(p * g(float(v)) for v, p in zip(vals, probs)))


def _script_L(L: float, beta: float) -> float:
    return (1.0 - beta) * L - beta


def expected_log_L0(L0: float, alpha: float, ell: float, noise: NoiseSpec) -> float:
    """E ln[(1 - a - l xi) L0 - a - l xi].

    Raises InfeasibleError unless alpha + |ell| < L0 / (L0 + 1), i.e. every
    factor over the support is positive.
    """
    if not alpha + abs(ell) < L0 / (L0 + 1):
        raise InfeasibleError(f"need alpha + |ell| < L0/(L0+1) = {L0 / (L0 + 1):.6g}")
    if ell == 0:
        return math.log(_script_L(L0, alpha))
    if noise.kind == "bernoulli":
        A = L0 - alpha * (L0 + 1)
        return 0.5 * math.log(A * A - ell * ell * (L0 + 1) ** 2)
    return _expect(noise, lambda u: math.log(_script_L(L0, alpha + ell * u)))


def expected_log_pair(L_minus: float, L_plus: float, alpha: float, ell: float,
                      noise: NoiseSpec) -> float:
    """E ln[L-(a + l xi) L+(a + l xi)] with L(b) = (1 - b) L - b.

    For Bernoulli noise this is 0.5 * ln V(alpha, ell).
    """
    top = alpha + abs(ell)
    if not (_script_L(L_minus, top) > 0 and _script_L(L_plus, top) > 0):
        raise InfeasibleError("a factor L(alpha + ell xi) is non-positive on the support")
    if noise.kind == "bernoulli" and ell != 0:
        return 0.5 * math.log(mathcal_V(L_minus, L_plus, alpha, ell))

    def g(u):
        b = alpha + ell * u
        return math.log(_script_L(L_minus, b)) + math.log(_script_L(L_plus, b))

    if ell == 0:
        return g(0.0)
    return _expect(noise, g)


def mathcal_V(L_minus: float, L_plus: float, alpha: float, ell: float) -> float:
    """[(L- - a(L-+1))^2 - l^2 (L-+1)^2] [(L+ - a(L++1))^2 - l^2 (L++1)^2]."""
    left = (L_minus - alpha * (L_minus + 1)) ** 2 - ell**2 * (L_minus + 1) ** 2
    right = (L_plus - alpha * (L_plus + 1)) ** 2 - ell**2 * (L_plus + 1) ** 2
    return left * right


def monte_carlo_log_pair(L_minus: float, L_plus: float, alpha: float, ell: float,
                         noise: NoiseSpec, draws: int, rng: np.random.Generator,
                         chunk: int = 1_000_000) -> tuple[float, float, int]:
    """Sample mean and standard error of ln[L-(b) L+(b)], b = alpha + ell xi.

    Returns ``(mean, stderr, violations)``; draws with a non-positive product
    are counted as violations and left out of the mean.
    """
    total = 0.0
    total_sq = 0.0
    used = 0
    bad = 0
    left = draws
    while left > 0:
        n = min(chunk, left)
        left -= n
        b = alpha + ell * transform(noise, rng.random(n))
        prod = ((1 - b) * L_minus - b) * ((1 - b) * L_plus - b)
        ok = prod > 0
        bad += int(n - ok.sum())
        v = np.log(prod[ok])
        total += float(v.sum())
        total_sq += float((v * v).sum())
        used += int(ok.sum())
    if used == 0:
        return math.nan, math.nan, bad
    mean = total / used
    var = max(total_sq / used - mean * mean, 0.0) * used / max(used - 1, 1)
    return mean, math.sqrt(var / used), bad


def empirical_mean(values: Sequence[float]) -> float:
    return float(np.mean(values))
