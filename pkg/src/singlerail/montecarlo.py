"""Poisson count traces over a drifting phase and two visibility estimators.

A trace is ``n_t ~ Poisson(N (1 + V cos phi_t) / 2)``.  The phase follows a
wrapped Gaussian random walk (slow drift) or is drawn i.i.d. uniform.

Random streams: trace ``j`` of grid point ``i`` in a benchmark seeded with
``seed`` uses ``SeedSequence(seed, spawn_key=(i, j))``, so results do not
depend on evaluation order or on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

RANDOM_WALK = "random_walk"
UNIFORM_IID = "uniform"
DEFAULT_STEP_SIGMA = 0.05
DEFAULT_BINS = 100_000


@dataclass(frozen=True)
class TraceParams:
    n_mean: float
    v_true: float
    bins: int = DEFAULT_BINS
    phase_process: str = RANDOM_WALK
    step_sigma: float = DEFAULT_STEP_SIGMA
    seed: int = 0

    def __post_init__(self):
        if not self.n_mean > 0.0:
            raise DomainError("n_mean must be positive")
        if not 0.0 <= self.v_true <= 1.0:
            raise DomainError("v_true outside [0, 1]")
        if int(self.bins) != self.bins or self.bins < 1:
            raise DomainError("bins must be a positive integer")
        if self.phase_process not in (RANDOM_WALK, UNIFORM_IID):
            raise DomainError(f"unknown phase process {self.phase_process!r}")
        if self.step_sigma < 0.0:
            raise DomainError("step_sigma must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class CountTrace:
    counts: np.ndarray
    params: TraceParams

    def __len__(self) -> int:
        return len(self.counts)


def _rng(seed, spawn_key: tuple[int, ...] = ()) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=spawn_key))


def simulate_phase(p: TraceParams, rng: np.random.Generator) -> np.ndarray:
    if p.phase_process == UNIFORM_IID:
        return rng.uniform(0.0, 2.0 * math.pi, p.bins)
    start = rng.uniform(0.0, 2.0 * math.pi)
    steps = rng.normal(0.0, p.step_sigma, p.bins)
    steps[0] = 0.0
    return np.mod(start + np.cumsum(steps), 2.0 * math.pi)


def simulate_trace(p: TraceParams, spawn_key: tuple[int, ...] = ()) -> CountTrace:
    """Draw a count trace; identical (seed, spawn_key, params) give identical counts."""
    rng = _rng(p.seed, spawn_key)
    phi = simulate_phase(p, rng)
    lam = p.n_mean * (1.0 + p.v_true * np.cos(phi)) / 2.0
    return CountTrace(rng.poisson(lam), p)


def noiseless_trace(n_mean: float, v_true: float, bins: int) -> np.ndarray:
    """Rounded fringe ``N (1 + V cos phi) / 2`` on an evenly spaced phase grid."""
    phi = 2.0 * math.pi * np.arange(bins) / bins
    return np.rint(n_mean * (1.0 + v_true * np.cos(phi)) / 2.0)


def phase_stat_sigma(p: TraceParams, harmonic: int) -> float:
    """Standard error of the time average of ``cos(k phi)`` under the phase process.

    For the random walk the lag-j autocorrelation is ``rho**j`` with
    ``rho = exp(-k**2 sigma**2 / 2)``, inflating the i.i.d. variance 1/(2n) by
    the integrated autocorrelation time ``(1 + rho) / (1 - rho)``.
    """
    base = 1.0 / (2.0 * p.bins)
    if p.phase_process == UNIFORM_IID:
        return math.sqrt(base)
    if p.step_sigma == 0.0:
        raise DomainError("a frozen phase never averages out")
    rho = math.exp(-(harmonic**2) * p.step_sigma**2 / 2.0)
    return math.sqrt(base * (1.0 + rho) / (1.0 - rho))


def _counts(trace) -> np.ndarray:
    c = trace.counts if isinstance(trace, CountTrace) else trace
    c = np.asarray(c, dtype=float)
    if c.size == 0:
        raise DomainError("empty trace")
    return c


def estimate_visibility_minmax(trace) -> float:
    """(max - min) / (max + min) of the raw counts."""
    c = _counts(trace)
    hi, lo = float(np.max(c)), float(np.min(c))
    if hi + lo == 0.0:
        raise DomainError("all-zero trace")
    return (hi - lo) / (hi + lo)


def estimate_visibility_variance_flagged(trace) -> tuple[float, bool]:
    """Variance estimator and whether its radicand was negative (clamped to 0)."""
    c = _counts(trace)
    mean = float(np.mean(c))
    if mean <= 0.0:
        raise DomainError("mean count must be positive")
    var = float(np.mean(c * c)) - mean * mean
    radicand = 2.0 * (var - mean) / (mean * mean)
    if radicand < 0.0:
        return 0.0, True
    return math.sqrt(radicand), False


def estimate_visibility_variance(trace) -> float:
    """``sqrt(2 (<n^2> - <n>^2 - <n>) / <n>^2)``; Poisson shot noise removed from the variance."""
    return estimate_visibility_variance_flagged(trace)[0]


ESTIMATORS = ("minmax", "variance")


@dataclass(frozen=True)
class BenchmarkRow:
    n_mean: float
    estimator: str
    mean: float
    std: float
    trials: int
    bins: int
    v_true: float


@dataclass(frozen=True)
class BenchmarkTable:
    rows: tuple[BenchmarkRow, ...]

    def get(self, n_mean: float, estimator: str) -> BenchmarkRow:
        for r in self.rows:
            if r.n_mean == n_mean and r.estimator == estimator:
                return r
        raise KeyError((n_mean, estimator))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "estimator", "mean", "std", "trials", "bins", "v_true"])
        for r in self.rows:
            w.writerow(
                [f"{r.n_mean:.17g}", r.estimator, f"{r.mean:.17g}", f"{r.std:.17g}", r.trials, r.bins, f"{r.v_true:.17g}"]
            )
        return buf.getvalue()


def _trial(args) -> tuple[float, float]:
    params, key = args
    trace = simulate_trace(params, key)
    return estimate_visibility_minmax(trace), estimate_visibility_variance(trace)


def estimator_benchmark(
    n_grid: Sequence[float],
    v_true: float,
    bins: int = DEFAULT_BINS,
    trials: int = 100,
    seed: int = 0,
    workers: int = 1,
    phase_process: str = RANDOM_WALK,
    step_sigma: float = DEFAULT_STEP_SIGMA,
) -> BenchmarkTable:
    """Mean and sample standard deviation of both estimators for each N."""
    if trials < 1:
        raise DomainError("trials must be positive")
    if workers < 1:
        raise DomainError("workers must be positive")
    tasks = []
    for i, n in enumerate(n_grid):
        p = TraceParams(float(n), v_true, bins, phase_process, step_sigma, seed)
        tasks += [(p, (i, j)) for j in range(trials)]
    if workers == 1:
        results = [_trial(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    rows = []
    for i, n in enumerate(n_grid):
        block = np.asarray(results[i * trials : (i + 1) * trials])
        for k, name in enumerate(ESTIMATORS):
            vals = block[:, k]
            std = float(np.std(vals, ddof=1)) if trials > 1 else 0.0
            rows.append(BenchmarkRow(float(n), name, float(np.mean(vals)), std, trials, bins, float(v_true)))
    return BenchmarkTable(tuple(rows))
