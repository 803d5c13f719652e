"""Bifurcation sweeps over alpha, (alpha, ell) stability rasters and envelope curves.

Each (alpha, ell, path) lane owns the stream keyed by its grid indices, so the
numbers do not change with batch size or worker count.
"""
from __future__ import annotations

import csv
import json
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import WINDOW, Outcome, classify, simulate_batch
from .maps import MapSpec, load_piecewise_json, parse_map, probe_map
from .noise import NoiseSpec
from .stability import (
    ControlSpec,
    NotApplicableError,
    Verdict,
    alpha0,
    analytic_verdict,
    beta_star,
    envelope_values,
)

LANES_PER_BATCH = 8192


# ---------------------------------------------------------------------------
# map transport for worker processes


def _spec_token(spec: MapSpec):
    if spec.segments:
        return ("pl", {"name": spec.name, "tail": spec.tail,
                       "segments": [{"lo": s.lo, "hi": s.hi, "slope": s.slope,
                                     "intercept": s.intercept} for s in spec.segments]})
    try:
        if parse_map(spec.describe()) == spec:
            return ("builtin", spec.describe())
    except ValueError:
        pass
    return None


def _spec_from_token(tok) -> MapSpec:
    kind, payload = tok
    return load_piecewise_json(payload) if kind == "pl" else parse_map(payload)


def _run_lanes(tok_or_spec, alpha, ell, noise_cfg, horizon, seed, keys, tail, x0_range):
    spec = tok_or_spec if isinstance(tok_or_spec, MapSpec) else _spec_from_token(tok_or_spec)
    probe = probe_map(spec)
    res = simulate_batch(spec, alpha, ell, NoiseSpec.from_config(noise_cfg), None, horizon, seed,
                         keys, probe=probe, tail=tail, x0_range=x0_range)
    verdicts = np.array([Outcome.ESCAPED.value if e else classify(t[-WINDOW:], probe.K).value
                         for t, e in zip(res.tail, res.escaped)])
    return res.tail, verdicts, int(res.trap_violations.sum()), int(res.rise_violations.sum())


def _dispatch(spec, alpha, ell, noise, horizon, seed, keys, tail, x0_range, workers):
    """Run lanes in batches, optionally across processes; output order follows ``keys``."""
    L = len(keys)
    bounds = [(i, min(i + LANES_PER_BATCH, L)) for i in range(0, L, LANES_PER_BATCH)]
    if workers > 1 and len(bounds) == 1 and L >= 2 * workers:
        step_ = math.ceil(L / workers)
        bounds = [(i, min(i + step_, L)) for i in range(0, L, step_)]
    tok = _spec_token(spec) if workers > 1 else None
    jobs = [(alpha[a:b], ell[a:b], keys[a:b]) for a, b in bounds]
    cfg = noise.to_config()
    if tok is not None and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_lanes, tok, al, el, cfg, horizon, seed, ks, tail, x0_range)
                    for al, el, ks in jobs]
            parts = [f.result() for f in futs]
    else:
        parts = [_run_lanes(spec, al, el, cfg, horizon, seed, ks, tail, x0_range)
                 for al, el, ks in jobs]
    tails = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, tail))
    verdicts = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=str)
    return tails, verdicts, sum(p[2] for p in parts), sum(p[3] for p in parts)


# ---------------------------------------------------------------------------
# bifurcation


@dataclass
class BifurcationTable:
    alphas: np.ndarray
    states: np.ndarray  # (n_alpha, paths, samples), nan where skipped
    rates: np.ndarray  # (n_alpha,), nan where skipped
    skipped: np.ndarray  # (n_alpha,) bool
    meta: dict = field(default_factory=dict)

    def pairs(self):
        for i, a in enumerate(self.alphas):
            if self.skipped[i]:
                continue
            for v in self.states[i].ravel():
                yield float(a), float(v)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "sample"])
            for a, v in self.pairs():
                w.writerow([repr(a), repr(v)])

    def rates_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "rate", "skipped"])
            for a, r, s in zip(self.alphas, self.rates, self.skipped):
                w.writerow([repr(float(a)), "" if s else repr(float(r)), int(s)])


def alpha_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Inclusive grid lo, lo + step, ..., hi rounded to 12 digits."""
    n = int(round((hi - lo) / step))
    return np.round(lo + step * np.arange(n + 1), 12)


def bifurcation_sweep(spec: MapSpec, noise: NoiseSpec, ell: float, alphas: Sequence[float], *,
                      transient: int = 1000, samples: int = 200, paths_per_alpha: int = 1,
                      master_seed: int = 0, x0_range: tuple[float, float] | None = None,
                      workers: int = 1) -> BifurcationTable:
    """Post-transient states for each alpha; the convergence rate uses the last 200 states."""
    alphas = np.asarray(alphas, dtype=float)
    skipped = np.array([not ControlSpec.admissible(float(a), ell) for a in alphas])
    horizon = transient + samples
    tail = max(samples, WINDOW)
    idx = [i for i in range(len(alphas)) if not skipped[i]]
    keys = [(i, p) for i in idx for p in range(paths_per_alpha)]
    al = np.repeat(alphas[idx], paths_per_alpha)
    el = np.full(len(keys), float(ell))
    tails, verdicts, tv, rv = _dispatch(spec, al, el, noise, horizon, master_seed, keys, tail,
                                        x0_range, workers)
    states = np.full((len(alphas), paths_per_alpha, samples), np.nan)
    rates = np.full(len(alphas), np.nan)
    for k, i in enumerate(idx):
        sl = slice(k * paths_per_alpha, (k + 1) * paths_per_alpha)
        states[i] = tails[sl, -samples:]
        rates[i] = float(np.mean(verdicts[sl] == Outcome.CONVERGED.value))
    meta = {
        "kind": "bifurcation", "map": spec.describe(), "noise": noise.to_config(), "ell": ell,
        "alphas": [float(a) for a in alphas], "transient": transient, "samples": samples,
        "paths_per_alpha": paths_per_alpha, "master_seed": master_seed,
        "x0_range": list(x0_range) if x0_range else None,
        "trap_violations": tv, "rise_violations": rv,
    }
    return BifurcationTable(alphas, states, rates, skipped, meta)


def collapse_threshold(alphas: Sequence[float], rates: Sequence[float], level: float = 0.99,
                       sustained: bool = True) -> float | None:
    """Smallest alpha whose convergence rate reaches ``level``.

    With ``sustained`` every larger grid alpha must reach it too, which skips
    isolated lucky cells inside the non-converging range.
    """
    a = np.asarray(alphas, dtype=float)
    r = np.asarray(rates, dtype=float)
    ok = np.where(np.isnan(r), True, r >= level)
    valid = ~np.isnan(r)
    if not sustained:
        hits = np.flatnonzero(ok & valid)
        return float(a[hits[0]]) if hits.size else None
    if not ok[-1]:
        return None
    i = len(a) - 1
    while i > 0 and ok[i - 1]:
        i -= 1
    while i < len(a) and not valid[i]:
        i += 1
    return float(a[i]) if i < len(a) else None


# ---------------------------------------------------------------------------
# stability raster


@dataclass
class StabilityRegion:
    alpha_grid: np.ndarray
    ell_grid: np.ndarray
    analytic: np.ndarray  # (n_alpha, n_ell) of Verdict values
    rate: np.ndarray  # (n_alpha, n_ell), nan where not simulated
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.alpha_grid) <= 0) or np.any(np.diff(self.ell_grid) <= 0):
            raise ValueError("grids must be strictly increasing")
        shape = (len(self.alpha_grid), len(self.ell_grid))
        if self.analytic.shape != shape or self.rate.shape != shape:
            raise ValueError("verdict and rate arrays must match the grid")

    def disagreements(self, level: float = 0.99) -> list[dict]:
        """Cells certified analytically whose empirical rate falls below ``level``."""
        out = []
        for i, a in enumerate(self.alpha_grid):
            for j, e in enumerate(self.ell_grid):
                if self.analytic[i, j] == Verdict.HOLDS.value and not (self.rate[i, j] >= level):
                    out.append({"alpha": float(a), "ell": float(e), "rate": float(self.rate[i, j])})
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "ell", "analytic", "rate"])
            for i, a in enumerate(self.alpha_grid):
                for j, e in enumerate(self.ell_grid):
                    r = self.rate[i, j]
                    w.writerow([repr(float(a)), repr(float(e)), self.analytic[i, j],
                                "" if np.isnan(r) else repr(float(r))])


def region_raster(spec: MapSpec, noise: NoiseSpec, alpha_grid: Sequence[float],
                  ell_grid: Sequence[float], *, L0: float | None = None,
                  L_pair: tuple[float, float] | None = None,
                  sides: tuple[float, float] | None = None, beta_s: float | None = None,
                  paths: int = 200, horizon: int = 10_000, master_seed: int = 0,
                  simulate: bool = True, x0_range: tuple[float, float] | None = None,
                  workers: int = 1) -> StabilityRegion:
    """Analytic verdict and empirical convergence rate on an (alpha, ell) grid."""
    ag = np.asarray(alpha_grid, dtype=float)
    eg = np.asarray(ell_grid, dtype=float)
    probe = probe_map(spec)
    if L0 is None and L_pair is None:
        if probe.L0 is not None:
            L0 = probe.L0
        else:
            L_pair = (probe.L_minus, probe.L_plus)
    bs = beta_s if beta_s is not None else beta_star(spec, probe)
    analytic = np.empty((len(ag), len(eg)), dtype=object)
    for i, a in enumerate(ag):
        for j, e in enumerate(eg):
            analytic[i, j] = analytic_verdict(float(a), float(e), noise, bs, L0=L0,
                                              L_pair=L_pair, sides=sides).value
    analytic = analytic.astype(str)
    rate = np.full((len(ag), len(eg)), np.nan)
    tv = rv = 0
    if simulate and paths > 0:
        cells = [(i, j) for i in range(len(ag)) for j in range(len(eg))
                 if analytic[i, j] != Verdict.INFEASIBLE.value]
        keys = [(i, j, p) for i, j in cells for p in range(paths)]
        al = np.repeat([ag[i] for i, _ in cells], paths)
        el = np.repeat([eg[j] for _, j in cells], paths)
        _, verdicts, tv, rv = _dispatch(spec, al, el, noise, horizon, master_seed, keys, WINDOW,
                                        x0_range, workers)
        conv = (verdicts == Outcome.CONVERGED.value).reshape(len(cells), paths)
        for k, (i, j) in enumerate(cells):
            rate[i, j] = float(conv[k].mean())
    meta = {
        "kind": "region", "map": spec.describe(), "noise": noise.to_config(),
        "alpha_grid": ag.tolist(), "ell_grid": eg.tolist(), "L0": L0,
        "L_pair": list(L_pair) if L_pair else None, "sides": list(sides) if sides else None,
        "beta_star": bs, "paths": paths, "horizon": horizon, "master_seed": master_seed,
        "x0_range": list(x0_range) if x0_range else None,
        "trap_violations": tv, "rise_violations": rv,
    }
    return StabilityRegion(ag, eg, analytic, rate, meta)


def analytic_boundary(region: StabilityRegion) -> list[tuple[float, float | None]]:
    """For each ell, the smallest alpha whose analytic verdict holds."""
    out = []
    for j, e in enumerate(region.ell_grid):
        col = np.flatnonzero(region.analytic[:, j] == Verdict.HOLDS.value)
        out.append((float(e), float(region.alpha_grid[col[0]]) if col.size else None))
    return out


# ---------------------------------------------------------------------------
# envelope curve


@dataclass
class EnvelopeCurve:
    alpha: float
    xs: np.ndarray
    values: np.ndarray

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    @property
    def argmax(self) -> float:
        return float(self.xs[int(np.argmax(self.values))])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "envel"])
            for x, v in zip(self.xs, self.values):
                w.writerow([repr(float(x)), repr(float(v))])


def envelope_curve(spec: MapSpec, alpha: float | None = None, n: int = 1000) -> EnvelopeCurve:
    """envel(x) on an n-point grid of [x_max, K) at gain ``alpha`` (default alpha0)."""
    probe = probe_map(spec)
    if probe.L0 is None or any(probe.x_max <= b <= probe.K for b in spec.breakpoints):
        raise NotApplicableError(f"{spec.name} is not smooth on [x_max, K]")
    al = alpha if alpha is not None else alpha0(probe.L0)
    xs = np.linspace(probe.x_max, probe.K, n + 1)[:-1]
    return EnvelopeCurve(al, xs, envelope_values(spec, al, xs))


# ---------------------------------------------------------------------------
# provenance


def write_sidecar(path, meta: dict) -> None:
    doc = dict(meta)
    doc.setdefault("python", platform.python_version())
    doc.setdefault("numpy", np.__version__)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value"):
        return o.value
    raise TypeError(type(o))
