"""One-dimensional maps f: [0, inf) -> [0, inf) and their structural constants.

Every map here has f(0) = 0 and a single positive equilibrium K with
f(x) > x below K and 0 < f(x) < x above it.  Rules are vectorised: they take
and return numpy arrays.
"""
from __future__ import annotations

import dataclasses
import functools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

GRID = 10_000
REFINE_TOL = 1e-10


class MapError(ValueError):
    """Base class for map construction / probing failures."""


class MapDomainError(MapError):
    pass


class BracketError(MapError):
    pass


class AmbiguityError(MapError):
    pass


class StructureError(MapError):
    pass


class SmoothnessError(MapError):
    pass


class SingularityError(MapError):
    pass


Rule = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MapSpec:
    """A named map with bound parameters.

    ``rule`` must accept a float array and return an array of the same shape.
    ``derivatives`` (optional) holds analytic rules for f', f'', f'''.
    ``breakpoints`` lists points where the map is not differentiable.
    """

    name: str
    params: tuple[tuple[str, float], ...]
    rule: Rule = field(compare=False)
    derivatives: tuple[Rule, ...] | None = field(default=None, compare=False)
    breakpoints: tuple[float, ...] = ()
    smooth_at_K: bool = True
    bracket: tuple[float, float] = (0.5, 2.0)
    anchor: str = ""
    segments: tuple["Segment", ...] = ()
    tail: float | None = None

    @property
    def param_dict(self) -> dict[str, float]:
        return dict(self.params)

    def __call__(self, x):
        return eval_map(self, x)

    def describe(self) -> str:
        if not self.params:
            return self.name
        return self.name + " " + " ".join(f"{k}={v:g}" for k, v in self.params)


@dataclass(frozen=True)
class MapProbe:
    K: float
    x_max: float
    f_m: float
    f2_m: float
    L_minus: float
    L_plus: float
    L0: float | None
    schwarzian_ok: bool | None
    swapped: bool = False  # True when the right side was steeper and labels were exchanged

    @property
    def trap(self) -> tuple[float, float]:
        return (self.f2_m, self.f_m)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "x_max": self.x_max,
            "f_m": self.f_m,
            "f2_m": self.f2_m,
            "L_minus": self.L_minus,
            "L_plus": self.L_plus,
            "L0": self.L0,
            "schwarzian_ok": self.schwarzian_ok,
            "swapped": self.swapped,
        }


# ---------------------------------------------------------------------------
# evaluation


def eval_map(spec: MapSpec, x):
    """f(x) for scalar or array x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise MapDomainError(f"{spec.name}: map is defined on x >= 0 only")
    out = spec.rule(arr)
    if np.ndim(x) == 0:
        return float(out)
    return out


def controlled(spec: MapSpec, beta, x):
    """G(beta, x) = (1 - beta) f(x) + beta x, vectorised, no domain checks."""
    x = np.asarray(x, dtype=float)
    return (1.0 - beta) * spec.rule(x) + beta * x


# ---------------------------------------------------------------------------
# built-in maps


def _ricker(r: float) -> MapSpec:
    if not r > 0:
        raise MapError("ricker: r must be positive")

    def rule(x):
        return x * np.exp(r * (1.0 - x))

    def d1(x):
        return np.exp(r * (1.0 - x)) * (1.0 - r * x)

    def d2(x):
        return -r * np.exp(r * (1.0 - x)) * (2.0 - r * x)

    def d3(x):
        return r * r * np.exp(r * (1.0 - x)) * (3.0 - r * x)

    return MapSpec(
        name="ricker",
        params=(("r", float(r)),),
        rule=rule,
        derivatives=(d1, d2, d3),
        bracket=(0.5, 2.0),
        anchor="Ricker population model f(x) = x exp(r(1-x)), K = 1",
    )


def _quail() -> MapSpec:
    def rule(x):
        return x * (0.55 + 3.45 / (1.0 + x**9))

    def d1(x):
        x9 = x**9
        return (11 * x9 * x9 - 530 * x9 + 80) / (20 * (x9 + 1) ** 2)

    def d2(x):
        x9 = x**9
        return 621 * x**8 * (4 * x9 - 5) / (10 * (x9 + 1) ** 3)

    def d3(x):
        x9 = x**9
        return 150903 * x**16 / (10 * (x9 + 1) ** 4) - 2484 * x**7 / (x9 + 1) ** 2

    return MapSpec(
        name="quail",
        params=(),
        rule=rule,
        derivatives=(d1, d2, d3),
        bracket=(1.0, 2.0),
        anchor="bobwhite quail model x(0.55 + 3.45/(1+x^9)), K ~ 1.2347",
    )


@dataclass(frozen=True)
class Segment:
    lo: float
    hi: float
    slope: float
    intercept: float


def piecewise_linear(
    segments: Sequence[Segment],
    tail: float,
    *,
    name: str = "piecewise",
    anchor: str = "",
    bracket: tuple[float, float] | None = None,
) -> MapSpec:
    """Map made of half-open segments [lo, hi) plus a constant tail for x >= last hi."""
    segs = tuple(sorted(segments, key=lambda s: s.lo))
    if not segs:
        raise MapError("piecewise map needs at least one segment")
    if segs[0].lo != 0.0:
        raise MapError("first segment must start at 0")
    for a, b in zip(segs, segs[1:]):
        if a.hi != b.lo:
            raise MapError(f"segments must tile [0, {segs[-1].hi}) without gaps")
    los = np.array([s.lo for s in segs])
    slopes = np.array([s.slope for s in segs])
    icpts = np.array([s.intercept for s in segs])
    end = segs[-1].hi
    tail = float(tail)

    def rule(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(los, x, side="right") - 1, 0, len(segs) - 1)
        val = slopes[idx] * x + icpts[idx]
        return np.where(x >= end, tail, val)

    def d1(x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(los, x, side="right") - 1, 0, len(segs) - 1)
        return np.where(x >= end, 0.0, slopes[idx])

    def zero(x):
        return np.zeros_like(np.asarray(x, dtype=float))

    breaks = tuple(float(s.lo) for s in segs[1:]) + (float(end),)
    if bracket is None:
        bracket = (0.0, end)
    return MapSpec(
        name=name,
        params=(),
        rule=rule,
        derivatives=(d1, zero, zero),
        breakpoints=breaks,
        smooth_at_K=True,
        bracket=bracket,
        anchor=anchor,
        segments=segs,
        tail=tail,
    )


def load_piecewise_json(source: str | dict, name: str = "piecewise") -> MapSpec:
    """Build a piecewise-linear map from ``{"segments": [...], "tail": c}``.

    ``source`` may be a path, a JSON string, or an already-parsed dict.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = source
        if not text.lstrip().startswith("{"):
            with open(text) as fh:
                text = fh.read()
        doc = json.loads(text)
    try:
        segs = [Segment(float(s["lo"]), float(s["hi"]), float(s["slope"]), float(s["intercept"]))
                for s in doc["segments"]]
        tail = doc["tail"]
    except (KeyError, TypeError) as exc:
        raise MapError(f"bad piecewise document: {exc}") from exc
    return _finalize_pl(piecewise_linear(segs, tail, name=doc.get("name", name)))


def _finalize_pl(spec: MapSpec) -> MapSpec:
    K, _ = find_equilibrium(spec, (1e-9, spec.segments[-1].hi))
    smooth = not any(abs(K - b) <= 1e-12 * max(1.0, K) for b in spec.breakpoints)
    return dataclasses.replace(spec, smooth_at_K=smooth,
                               bracket=(K / 2, min(2 * K, spec.segments[-1].hi)))


def _exglob() -> MapSpec:
    segs = [
        Segment(0, 28, 51 / 28, 0),
        Segment(28, 29, -6, 219),
        Segment(29, 31, -5, 190),
        Segment(31, 32, -3, 128),
        Segment(32, 33, -2, 96),
        Segment(33, 38, -1.4, 76.2),
        Segment(38, 50, -1.2, 68.6),
    ]
    spec = piecewise_linear(segs, 8.6, name="exglob",
                            anchor="piecewise-linear map, K=32, local gain 5/12 is also global")
    return _finalize_pl(spec)


def _exnotglob() -> MapSpec:
    segs = [
        Segment(0, 28, 50 / 28, 0),
        Segment(28, 31, -5, 190),
        Segment(31, 32, -3, 128),
        Segment(32, 33, -2, 96),
        Segment(33, 45, -1.7, 86.1),
    ]
    spec = piecewise_linear(segs, 9.6, name="exnotglob",
                            anchor="piecewise-linear map, K=32, two-cycle survives the local gain 5/12")
    return _finalize_pl(spec)


def _exswitch() -> MapSpec:
    pi = math.pi
    b1, b2 = 1 - 2 / pi, 1 + 2 / pi
    rise = (pi + 2) / (pi - 2)
    floor = 1 - 3 / pi

    def rule(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.sin(1.0 / (x - 1.0))
            left = (1 - x) * (1.5 + 0.5 * s) + 1
            right = (1 - x) * (1.25 + 0.25 * s) + 1
        return np.select(
            [x <= b1, x < 1, x == 1, x < b2],
            [rise * x, left, np.ones_like(x), right],
            floor,
        )

    return MapSpec(
        name="exswitch",
        params=(),
        rule=rule,
        derivatives=None,
        breakpoints=(b1, 1.0, b2),
        smooth_at_K=False,
        bracket=(0.5, 1.5),
        anchor="oscillating map, not differentiable at K=1, one-sided slopes 2 and 1.5",
    )


BUILTINS: dict[str, tuple[Callable[..., MapSpec], str]] = {
    "ricker": (_ricker, "Ricker x*exp(r(1-x)); param r (default 3.5); alpha0 = (r-2)/r"),
    "quail": (_quail, "bobwhite quail x(0.55 + 3.45/(1+x^9)); smooth, derivative envelope check"),
    "exglob": (_exglob, "piecewise-linear, K=32; multi-interval envelope certifies alpha > 5/12"),
    "exnotglob": (_exnotglob, "piecewise-linear, K=32; two-cycle at 5/12, refined gain ~0.463"),
    "exswitch": (_exswitch, "oscillating sin(1/(x-1)) map; non-smooth at K=1, deterministic gain 4/15"),
}

_DEFAULT_PARAMS = {"ricker": {"r": 3.5}}


@functools.lru_cache(maxsize=64)
def _cached_builtin(name: str, params: tuple[tuple[str, float], ...]) -> MapSpec:
    factory = BUILTINS[name][0]
    return factory(**dict(params))


def get_map(name: str, **params: float) -> MapSpec:
    """Look up a built-in map, e.g. ``get_map("ricker", r=3.0)``."""
    key = name.lower().replace("_", "").replace("-", "")
    if key not in BUILTINS:
        raise MapError(f"unknown map {name!r}; built-ins: {', '.join(BUILTINS)}")
    merged = dict(_DEFAULT_PARAMS.get(key, {}))
    merged.update({k: float(v) for k, v in params.items()})
    try:
        return _cached_builtin(key, tuple(sorted(merged.items())))
    except TypeError as exc:
        raise MapError(f"{name}: bad parameters {params}") from exc


def parse_map(text: str) -> MapSpec:
    """Parse ``"ricker r=3.5"`` style descriptions."""
    parts = text.split()
    if not parts:
        raise MapError("empty map description")
    params = {}
    for tok in parts[1:]:
        if "=" not in tok:
            raise MapError(f"bad parameter token {tok!r}, expected k=v")
        k, v = tok.split("=", 1)
        params[k] = float(v)
    return get_map(parts[0], **params)


# ---------------------------------------------------------------------------
# probing


def _scale(x: float) -> float:
    return max(1.0, abs(x))


def _bisect_root(h: Callable[[float], float], lo: float, hi: float) -> float:
    # runs to the floating-point limit; the residual contract is checked by the caller
    hlo = h(lo)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        hm = h(mid)
        if hm == 0 or mid in (lo, hi):
            return mid
        if (hm > 0) == (hlo > 0):
            lo, hlo = mid, hm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_equilibrium(spec: MapSpec, bracket: tuple[float, float] | None = None,
                     scan: int = 1000) -> tuple[float, float]:
    """Positive fixed point K by bisection on f(x) - x; returns (K, residual)."""
    lo, hi = bracket if bracket is not None else spec.bracket
    lo = max(lo, 0.0)
    if not hi > lo:
        raise BracketError(f"empty bracket ({lo}, {hi})")
    xs = np.linspace(lo, hi, scan + 1)
    if xs[0] == 0.0:
        xs = xs[1:]
    h = spec.rule(xs) - xs
    signs = np.sign(h)
    nz = signs[signs != 0]
    changes = int(np.count_nonzero(nz[1:] != nz[:-1]))
    if changes == 0:
        exact = xs[h == 0]
        if exact.size == 1:
            return float(exact[0]), 0.0
        raise BracketError(f"{spec.name}: f(x)-x has no sign change on ({lo}, {hi})")
    if changes > 1:
        raise AmbiguityError(f"{spec.name}: f(x)-x changes sign {changes} times on ({lo}, {hi})")
    exact = xs[h == 0]
    if exact.size:
        K = float(exact[0])
    else:
        i = int(np.flatnonzero(signs[:-1] * signs[1:] < 0)[0])
        a, b = float(xs[i]), float(xs[i + 1])
        g = lambda t: float(spec.rule(np.asarray(t))) - t  # noqa: E731
        K = _bisect_root(g, a, b)
    resid = abs(float(spec.rule(np.asarray(K))) - K)
    if resid > 1e-10 * _scale(K):
        raise BracketError(f"{spec.name}: bisection stalled with residual {resid:g}")
    return K, resid


def _largest_argmax(xs: np.ndarray, ys: np.ndarray) -> int:
    top = ys.max()
    ties = np.flatnonzero(ys >= top - 1e-14 * _scale(top))
    return int(ties[-1])


def probe_extrema(spec: MapSpec, K: float | None = None, n: int = GRID) -> tuple[float, float, float]:
    """(x_max, f_m, f2_m): largest maximiser of f on [0, K], its value, and inf f on (K, f_m]."""
    if K is None:
        K, _ = find_equilibrium(spec)
    xs = np.linspace(0.0, K, n + 1)
    ys = spec.rule(xs)
    i = _largest_argmax(xs, ys)
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, n)]
    cands = [float(xs[i])]
    if b > a:
        res = minimize_scalar(lambda t: -float(spec.rule(np.asarray(t))), bounds=(a, b),
                              method="bounded", options={"xatol": REFINE_TOL})
        cands.append(float(res.x))
    cands += [bp for bp in spec.breakpoints if 0.0 <= bp <= K]
    vals = [float(spec.rule(np.asarray(c))) for c in cands]
    top = max(vals)
    tied = [c for c, v in zip(cands, vals) if v >= top - 1e-12 * _scale(top)]
    x_max = max(tied)
    f_m = float(spec.rule(np.asarray(x_max)))
    right = np.linspace(K, f_m, n + 1)[1:]
    pts = np.concatenate([right, [bp for bp in spec.breakpoints if K < bp <= f_m]])
    f2_m = float(spec.rule(pts).min())
    return x_max, f_m, f2_m


def _lipschitz_sup(spec: MapSpec, K: float, left: tuple[float, float], right: tuple[float, float],
                   n: int) -> tuple[float, float]:
    xl = np.linspace(left[0], left[1], n + 2)[1:-1]
    xl = xl[xl < K]
    xr = np.linspace(right[0], right[1], n + 2)[1:-1]
    xr = xr[xr > K]
    lm = float(np.max((spec.rule(xl) - K) / (K - xl))) if xl.size else -math.inf
    lp = float(np.max((K - spec.rule(xr)) / (xr - K))) if xr.size else -math.inf
    return lm, lp


def estimate_lipschitz(spec: MapSpec, probe: MapProbe | None = None, *,
                       left: tuple[float, float] | None = None,
                       right: tuple[float, float] | None = None,
                       n: int = GRID) -> tuple[float, float]:
    """One-sided Lipschitz-type constants (L_minus, L_plus) at K.

    By default the left side is (x_max, K) and the right side (K, f_m); pass
    ``left``/``right`` to restrict to a sub-interval.
    """
    if probe is None:
        K, _ = find_equilibrium(spec)
        x_max, f_m, _ = probe_extrema(spec, K)
    else:
        K, x_max, f_m = probe.K, probe.x_max, probe.f_m
    left = left or (x_max, K)
    right = right or (K, f_m)
    lm, lp = _lipschitz_sup(spec, K, left, right, n)
    if not (lm > 0 and lp > 0):
        raise StructureError(f"{spec.name}: map does not cross K properly (L-={lm}, L+={lp})")
    if spec.derivatives is not None and spec.smooth_at_K:
        slope = abs(float(spec.derivatives[0](np.asarray(K))))
        lm, lp = max(lm, slope), max(lp, slope)
    return lm, lp


def _on_breakpoint(spec: MapSpec, x: float) -> bool:
    return any(abs(x - b) <= 1e-12 * _scale(b) for b in spec.breakpoints)


def derivative_at(spec: MapSpec, x: float, order: int = 1, *, strict: bool = True) -> float:
    """f^(order)(x): analytic rule if the map has one, otherwise central differences.

    With ``strict`` (the default) breakpoints of piecewise maps are rejected.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if strict and _on_breakpoint(spec, x):
        raise SmoothnessError(f"{spec.name} is not differentiable at x={x}")
    if spec.derivatives is not None:
        return float(spec.derivatives[order - 1](np.asarray(float(x))))
    f = lambda t: float(spec.rule(np.asarray(t)))  # noqa: E731
    if order == 1:
        h = 1e-5 * _scale(x)
        return (f(x + h) - f(x - h)) / (2 * h)
    h = 1e-4
    if order == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h**3)


def schwarzian_at(spec: MapSpec, x: float) -> float:
    d1 = derivative_at(spec, x, 1)
    if abs(d1) <= 1e-8:
        raise SingularityError(f"f'({x}) = {d1:g} is too close to zero")
    d2 = derivative_at(spec, x, 2)
    d3 = derivative_at(spec, x, 3)
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


def schwarzian_negative(spec: MapSpec, lo: float, hi: float, n: int = 2000) -> bool | None:
    """Sample (Sf)(x) < 0 on (lo, hi), skipping points near critical points.

    Returns None when the map is not smooth enough to ask the question.
    """
    if spec.derivatives is None or spec.breakpoints:
        return None
    for x in np.linspace(lo, hi, n + 2)[1:-1]:
        try:
            if schwarzian_at(spec, float(x)) >= 0:
                return False
        except SingularityError:
            continue
    return True


@functools.lru_cache(maxsize=128)
def probe_map(spec: MapSpec) -> MapProbe:
    """All structural constants of ``spec``; cached per map."""
    K, _ = find_equilibrium(spec)
    x_max, f_m, f2_m = probe_extrema(spec, K)
    if not (0 < f2_m < K < f_m):
        raise StructureError(
            f"{spec.name}: need 0 < f2_m < K < f_m, got f2_m={f2_m}, K={K}, f_m={f_m}")
    tmp = MapProbe(K, x_max, f_m, f2_m, math.nan, math.nan, None, None)
    lm, lp = estimate_lipschitz(spec, tmp)
    L0 = None
    if spec.derivatives is not None and spec.smooth_at_K:
        L0 = -float(spec.derivatives[0](np.asarray(K)))
    swapped = lp > lm
    if swapped:
        lm, lp = lp, lm
    sok = schwarzian_negative(spec, 1e-6 * K, 3 * K)
    return MapProbe(K, x_max, f_m, f2_m, lm, lp, L0, sok, swapped)
