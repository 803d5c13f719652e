"""Seeded simulation of x_{n+1} = G(alpha + ell xi_{n+1}, x_n) and trajectory classification.

One vectorised engine drives everything: a batch of independent lanes, each with
its own (alpha, ell, x0) and its own Philox stream.  Noise for a lane is drawn
in consecutive blocks from that lane's stream, so results do not depend on the
batch a lane happens to run in.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .maps import MapProbe, MapSpec, controlled, probe_map
from .noise import NoiseSpec, monte_carlo_log_pair, stream, transform
from .stability import ControlSpec

WINDOW = 200
KEEP_EDGES = 1000
CHUNK = 1024
ESCAPE = 1e300


class Outcome(str, enum.Enum):
    CONVERGED = "converged"
    TWO_CYCLE = "two_cycle"
    UNRESOLVED = "unresolved"
    ESCAPED = "escaped"


def step(spec: MapSpec, beta, x):
    """(1 - beta) f(x) + beta x."""
    out = controlled(spec, beta, x)
    return float(out) if np.ndim(out) == 0 else out


def default_tol(K: float) -> float:
    return 1e-6 * max(1.0, K)


def classify(window: np.ndarray, K: float, tol: float | None = None,
             cycle_tol: float | None = None) -> Outcome:
    """Verdict for the last states of one path.

    converged: every state within ``tol`` of K.  two_cycle: states alternate
    sides of K and each alternate subsequence stays within ``cycle_tol`` (default
    ``tol``) of its own mean.
    """
    tol = default_tol(K) if tol is None else tol
    cycle_tol = tol if cycle_tol is None else cycle_tol
    w = np.asarray(window, dtype=float)
    if not np.all(np.isfinite(w)):
        return Outcome.ESCAPED
    if np.all(np.abs(w - K) <= tol):
        return Outcome.CONVERGED
    even, odd = w[0::2], w[1::2]
    side = np.sign(w - K)
    alternating = np.all(side[:-1] * side[1:] < 0)
    if alternating and np.ptp(even) <= 2 * cycle_tol and np.ptp(odd) <= 2 * cycle_tol:
        return Outcome.TWO_CYCLE
    return Outcome.UNRESOLVED


@dataclass
class BatchResult:
    """Raw engine output for L lanes."""

    tail: np.ndarray  # (L, tail_len) last states, oldest first
    final: np.ndarray  # (L,)
    steps_to_trap: np.ndarray  # (L,) -1 if never trapped
    escaped: np.ndarray  # (L,) bool
    trap_violations: np.ndarray  # (L,) count of exits from the trap interval
    rise_violations: np.ndarray  # (L,) count of non-increasing steps below the trap
    path: np.ndarray | None = None  # (horizon+1,) states of the recorded lane
    betas: np.ndarray | None = None  # (horizon,) gains of the recorded lane


def simulate_batch(
    spec: MapSpec,
    alpha: np.ndarray,
    ell: np.ndarray,
    noise: NoiseSpec,
    x0: np.ndarray | None,
    horizon: int,
    master_seed: int,
    keys: Sequence[tuple[int, ...]],
    *,
    probe: MapProbe | None = None,
    tail: int = WINDOW,
    record: int | None = None,
    x0_range: tuple[float, float] | None = None,
) -> BatchResult:
    """Run ``len(keys)`` lanes for ``horizon`` steps.

    ``x0=None`` draws each lane's start uniformly from ``x0_range`` using the
    first value of its stream.  ``record`` names a lane whose full path is kept.
    """
    probe = probe or probe_map(spec)
    alpha = np.asarray(alpha, dtype=float)
    ell = np.asarray(ell, dtype=float)
    L = len(keys)
    alpha = np.broadcast_to(alpha, (L,)).copy()
    ell = np.broadcast_to(ell, (L,)).copy()
    gens = [stream(master_seed, *k) for k in keys]
    if x0 is None:
        lo, hi = x0_range or (0.05 * probe.K, 2.0 * probe.K)
        x = np.array([lo + (hi - lo) * g.random() for g in gens])
    else:
        x = np.broadcast_to(np.asarray(x0, dtype=float), (L,)).copy()
    if np.any(x <= 0):
        raise ValueError("initial states must be positive")
    noisy = bool(np.any(ell > 0))

    lo_t, hi_t = probe.f2_m, probe.f_m
    slack = 1e-12 * max(1.0, hi_t)
    in_trap = (x >= lo_t) & (x <= hi_t)
    steps_to_trap = np.where(in_trap, 0, -1)
    escaped = np.zeros(L, dtype=bool)
    trap_viol = np.zeros(L, dtype=np.int64)
    rise_viol = np.zeros(L, dtype=np.int64)
    tail_len = min(tail, horizon + 1)
    ring = np.empty((L, tail_len))
    path = betas = None
    if record is not None:
        path = np.empty(horizon + 1)
        betas = np.empty(horizon)
        path[0] = x[record]
    if horizon + 1 <= tail_len:
        ring[:, 0] = x

    n = 0
    while n < horizon:
        c = min(CHUNK, horizon - n)
        if noisy:
            xi = np.stack([transform(noise, g.random(c)) for g in gens])
            beta_blk = alpha[:, None] + ell[:, None] * xi
        else:
            beta_blk = np.broadcast_to(alpha[:, None], (L, c))
        for j in range(c):
            b = beta_blk[:, j]
            with np.errstate(over="ignore", invalid="ignore"):
                nx = (1.0 - b) * spec.rule(x) + b * x
            bad = ~np.isfinite(nx) | (nx > ESCAPE) | (nx < 0)
            if bad.any():
                escaped |= bad
                nx = np.where(bad, np.nan, nx)
            below = x < lo_t
            rise_viol += below & ~(nx > x) & ~bad
            now_in = (nx >= lo_t - slack) & (nx <= hi_t + slack)
            trap_viol += in_trap & ~now_in & ~bad
            newly = ~in_trap & now_in
            steps_to_trap = np.where(newly & (steps_to_trap < 0), n + j + 1, steps_to_trap)
            in_trap |= now_in
            x = np.where(escaped, np.nan, nx)
            k = n + j + 1
            if k > horizon - tail_len:
                ring[:, k - (horizon + 1 - tail_len)] = x
            if record is not None:
                path[k] = x[record]
                betas[k - 1] = b[record]
        n += c
    return BatchResult(ring, x.copy(), steps_to_trap, escaped, trap_viol, rise_viol, path, betas)


# ---------------------------------------------------------------------------
# single trajectories


def decimate_indices(n_states: int, keep: int = KEEP_EDGES, every: int | None = None) -> np.ndarray:
    """First and last ``keep`` indices plus every k-th index in between."""
    if n_states <= 2 * keep:
        return np.arange(n_states)
    every = every or max(1, (n_states - 2 * keep) // 1000)
    mid = np.arange(keep, n_states - keep, every)
    return np.unique(np.concatenate([np.arange(keep), mid, np.arange(n_states - keep, n_states)]))


@dataclass
class TrajectoryResult:
    verdict: Outcome
    steps_to_trap: int | None
    residual: float
    seed: int
    stream_index: tuple[int, ...]
    n: np.ndarray = field(repr=False)  # step numbers of the kept samples
    samples: np.ndarray = field(repr=False)
    betas: np.ndarray = field(repr=False)  # beta_n used to reach samples[i] (nan for n = 0)
    trap_violations: int = 0
    rise_violations: int = 0

    def summary(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "steps_to_trap": self.steps_to_trap,
            "residual": self.residual,
            "seed": self.seed,
            "stream_index": list(self.stream_index),
            "trap_violations": self.trap_violations,
            "rise_violations": self.rise_violations,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "x_n", "beta_n"])
            for n, x, b in zip(self.n, self.samples, self.betas):
                w.writerow([int(n), repr(float(x)), "" if math.isnan(b) else repr(float(b))])


def run_trajectory(spec: MapSpec, control: ControlSpec, noise: NoiseSpec, x0: float,
                   horizon: int, seed: int, stream_index: int | tuple[int, ...] = 0, *,
                   full: bool = False, window: int = WINDOW, tol: float | None = None,
                   cycle_tol: float | None = None) -> TrajectoryResult:
    """Simulate one path; samples are decimated unless ``full``."""
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    key = stream_index if isinstance(stream_index, tuple) else (int(stream_index),)
    probe = probe_map(spec)
    res = simulate_batch(spec, np.array([control.alpha]), np.array([control.ell]), noise,
                         np.array([x0]), horizon, seed, [key], probe=probe, tail=window, record=0)
    verdict = Outcome.ESCAPED if res.escaped[0] else classify(res.tail[0], probe.K, tol, cycle_tol)
    idx = np.arange(horizon + 1) if full else decimate_indices(horizon + 1)
    b = np.concatenate([[np.nan], res.betas])
    stt = int(res.steps_to_trap[0])
    return TrajectoryResult(
        verdict=verdict,
        steps_to_trap=None if stt < 0 else stt,
        residual=float(abs(res.final[0] - probe.K)),
        seed=seed,
        stream_index=key,
        n=idx,
        samples=res.path[idx],
        betas=b[idx],
        trap_violations=int(res.trap_violations[0]),
        rise_violations=int(res.rise_violations[0]),
    )


# ---------------------------------------------------------------------------
# ensembles


@dataclass
class EnsembleResult:
    rate: float
    verdicts: list[Outcome]
    trap_violations: int
    rise_violations: int

    def counts(self) -> dict[str, int]:
        out = {o.value: 0 for o in Outcome}
        for v in self.verdicts:
            out[v.value] += 1
        return out


def run_ensemble(spec: MapSpec, control: ControlSpec, noise: NoiseSpec, x0: float | None,
                 horizon: int, paths: int, master_seed: int, *, tol: float | None = None,
                 x0_range: tuple[float, float] | None = None) -> EnsembleResult:
    probe = probe_map(spec)
    keys = [(p,) for p in range(paths)]
    res = simulate_batch(spec, control.alpha, control.ell, noise,
                         None if x0 is None else np.full(paths, x0), horizon, master_seed, keys,
                         probe=probe, x0_range=x0_range)
    verdicts = [Outcome.ESCAPED if e else classify(t, probe.K, tol)
                for t, e in zip(res.tail, res.escaped)]
    rate = sum(v is Outcome.CONVERGED for v in verdicts) / paths
    return EnsembleResult(rate, verdicts, int(res.trap_violations.sum()),
                          int(res.rise_violations.sum()))


def convergence_probability(spec: MapSpec, control: ControlSpec, noise: NoiseSpec,
                            x0: float | None, horizon: int, paths: int, master_seed: int) -> float:
    """Fraction of paths classified as converged; path p uses stream index p."""
    return run_ensemble(spec, control, noise, x0, horizon, paths, master_seed).rate


# ---------------------------------------------------------------------------
# trap entry bound


def _grid_inf(fn, lo: float, hi: float, n: int = 10_000) -> float:
    xs = np.linspace(lo, hi, n + 1)
    return float(np.min(fn(xs)))


def trap_bound(spec: MapSpec, probe: MapProbe | None, beta_lo: float, beta_hi: float,
               x0: float) -> int:
    """Number of steps after which every path from x0 stays in [f2_m, f_m].

    Valid for any gain sequence in [beta_lo, beta_hi].  From below, each step
    gains at least (1 - beta_hi) * inf(f(x) - x).  From above f_m the path
    first descends, possibly landing below f2_m, and the climb back is added.
    """
    if not (0 < beta_lo <= beta_hi < 1):
        raise ValueError("need 0 < beta_lo <= beta_hi < 1")
    probe = probe or probe_map(spec)
    lo, hi = probe.f2_m, probe.f_m
    if lo <= x0 <= hi:
        return 1

    def from_below(x: float) -> int:
        if x >= lo:
            return 0
        d1 = _grid_inf(lambda t: spec.rule(t) - t, x, lo)
        return int(math.floor((lo - x) / (d1 * (1 - beta_hi)))) + 1

    if x0 < lo:
        return from_below(x0)
    d2 = _grid_inf(lambda t: t - spec.rule(t), hi, x0)
    n_plus = int(math.floor((x0 - hi) / (d2 * (1 - beta_hi)))) + 1
    # lowest point the descent can land on; G is affine in beta so the extremes suffice
    land = min(_grid_inf(lambda t: controlled(spec, beta_lo, t), hi, x0),
               _grid_inf(lambda t: controlled(spec, beta_hi, t), hi, x0))
    return n_plus + from_below(min(land, lo))


# ---------------------------------------------------------------------------
# law of large numbers check


@dataclass(frozen=True)
class EmpiricalLog:
    mean: float
    stderr: float
    violations: int
    draws: int


def empirical_expected_log(L_minus: float, L_plus: float, control: ControlSpec, noise: NoiseSpec,
                           draws: int, seed: int, stream_index: int = 0) -> EmpiricalLog:
    """Sample mean of ln[L-(beta) L+(beta)] with beta = alpha + ell xi."""
    if control.ell == 0:
        v = math.log(((1 - control.alpha) * L_minus - control.alpha)
                     * ((1 - control.alpha) * L_plus - control.alpha))
        return EmpiricalLog(v, 0.0, 0, draws)
    mean, se, bad = monte_carlo_log_pair(L_minus, L_plus, control.alpha, control.ell, noise,
                                         draws, stream(seed, stream_index))
    return EmpiricalLog(mean, se, bad, draws)
