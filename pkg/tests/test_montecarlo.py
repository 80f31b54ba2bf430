import math

import numpy as np
import pytest

from singlerail.errors import DomainError
from singlerail.montecarlo import (
    RANDOM_WALK,
    UNIFORM_IID,
    TraceParams,
    estimate_visibility_minmax,
    estimate_visibility_variance,
    estimate_visibility_variance_flagged,
    estimator_benchmark,
    noiseless_trace,
    phase_stat_sigma,
    simulate_phase,
    simulate_trace,
)


def test_params_validation():
    with pytest.raises(DomainError):
        TraceParams(0.0, 0.5)
    with pytest.raises(DomainError):
        TraceParams(10, 1.5)
    with pytest.raises(DomainError):
        TraceParams(10, 0.5, bins=0)
    with pytest.raises(DomainError):
        TraceParams(10, 0.5, phase_process="brownian")
    with pytest.raises(DomainError):
        TraceParams(10, 0.5, seed=-1)


def test_trace_is_deterministic():
    p = TraceParams(20, 0.7, 10_000, seed=42)
    a, b = simulate_trace(p), simulate_trace(p)
    assert np.array_equal(a.counts, b.counts)
    assert len(a) == 10_000
    assert not np.array_equal(a.counts, simulate_trace(p, (0, 1)).counts)
    assert not np.array_equal(a.counts, simulate_trace(TraceParams(20, 0.7, 10_000, seed=43)).counts)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_zero_visibility_is_poisson(seed):
    c = simulate_trace(TraceParams(10, 0.0, 100_000, seed=seed)).counts
    ratio = np.var(c) / np.mean(c)
    # the variance-to-mean ratio of a Poisson sample has standard error sqrt(2/n)
    assert abs(ratio - 1) <= 5 * math.sqrt(2 / len(c))
    # radicand fluctuates by about 2 * 5 sqrt(2/n) / N at five standard errors
    assert estimate_visibility_variance(c) <= math.sqrt(10 * math.sqrt(2 / len(c)) / 10)


@pytest.mark.parametrize("process", [RANDOM_WALK, UNIFORM_IID])
def test_trace_mean_is_half_n(process):
    p = TraceParams(40, 0.8, 100_000, process, seed=5)
    c = simulate_trace(p).counts
    # shot noise plus the phase-average fluctuation of the fringe term
    sigma = math.sqrt((40 / 2) / p.bins + (40 * 0.8 / 2) ** 2 * phase_stat_sigma(p, 1) ** 2)
    assert abs(np.mean(c) - 20) <= 5 * sigma


@pytest.mark.parametrize("process", [RANDOM_WALK, UNIFORM_IID])
@pytest.mark.parametrize("seed", range(4))
def test_phase_process_averages_out(process, seed):
    p = TraceParams(10, 0.5, 100_000, process, seed=seed)
    phi = simulate_phase(p, np.random.default_rng(np.random.SeedSequence(seed)))
    assert np.all((phi >= 0) & (phi < 2 * math.pi))
    for k in (1, 2):
        assert abs(np.mean(np.cos(k * phi))) <= 5 * phase_stat_sigma(p, k)


def test_phase_stat_sigma():
    assert phase_stat_sigma(TraceParams(1, 0, 200, UNIFORM_IID), 1) == pytest.approx(0.05)
    assert phase_stat_sigma(TraceParams(1, 0, 200), 1) > 0.05
    with pytest.raises(DomainError):
        phase_stat_sigma(TraceParams(1, 0, 200, step_sigma=0.0), 1)


def test_minmax_examples():
    assert estimate_visibility_minmax(noiseless_trace(1e6, 0.5, 100_000)) == pytest.approx(0.5, abs=1e-3)
    assert estimate_visibility_minmax(np.full(100, 7)) == 0.0
    biased = estimate_visibility_minmax(simulate_trace(TraceParams(10, 0.0, 100_000, seed=0)))
    assert biased > 0.5
    with pytest.raises(DomainError):
        estimate_visibility_minmax([])
    with pytest.raises(DomainError):
        estimate_visibility_minmax([0, 0])


@pytest.mark.parametrize("V", [0.3, 0.5, 0.9])
def test_variance_noiseless_closed_form(V):
    n = 1e6
    est = estimate_visibility_variance(noiseless_trace(n, V, 100_000))
    assert est == pytest.approx(math.sqrt(V * V - 4 / n), abs=1e-6)


def test_variance_clamps_with_flag():
    v, clamped = estimate_visibility_variance_flagged(np.full(1000, 5.0))
    assert (v, clamped) == (0.0, True)
    v, clamped = estimate_visibility_variance_flagged(noiseless_trace(1e4, 0.5, 1000))
    assert v > 0 and not clamped
    with pytest.raises(DomainError):
        estimate_visibility_variance([0, 0, 0])


def test_variance_estimator_accuracy_at_moderate_n():
    ests = [estimate_visibility_variance(simulate_trace(TraceParams(50, 0.9, 100_000, seed=7), (0, j))) for j in range(100)]
    assert np.mean(ests) == pytest.approx(0.9, abs=0.02)


def test_variance_estimator_consistency_in_bins():
    errs = []
    for bins in (1_000, 10_000, 100_000):
        row = estimator_benchmark([50], 0.9, bins=bins, trials=20, seed=3).get(50.0, "variance")
        errs.append(abs(row.mean - 0.9))
    assert errs[0] > errs[1] > errs[2]


def test_benchmark_bias_pattern():
    table = estimator_benchmark([5, 10, 50], 0.9, bins=100_000, trials=100, seed=1)
    for n in (5.0, 10.0):
        assert table.get(n, "minmax").mean > 0.9 * 1.1
    for n in (5.0, 10.0, 50.0):
        assert table.get(n, "variance").mean == pytest.approx(0.9, rel=0.02)
    with pytest.raises(KeyError):
        table.get(7.0, "minmax")


def test_benchmark_csv_and_determinism():
    a = estimator_benchmark([5, 20], 0.6, bins=2_000, trials=3, seed=11)
    b = estimator_benchmark([5, 20], 0.6, bins=2_000, trials=3, seed=11)
    assert a.to_csv() == b.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == "N,estimator,mean,std,trials,bins,v_true"
    assert len(lines) == 1 + 4
    one = estimator_benchmark([5], 0.6, bins=2_000, trials=1, seed=11)
    assert one.rows[0].std == 0.0
    assert one.to_csv() == estimator_benchmark([5], 0.6, bins=2_000, trials=1, seed=11).to_csv()


def test_benchmark_worker_independence():
    a = estimator_benchmark([5, 20], 0.6, bins=2_000, trials=3, seed=11, workers=1)
    b = estimator_benchmark([5, 20], 0.6, bins=2_000, trials=3, seed=11, workers=3)
    assert a.to_csv() == b.to_csv()


def test_benchmark_validation():
    with pytest.raises(DomainError):
        estimator_benchmark([5], 0.5, trials=0)
    with pytest.raises(DomainError):
        estimator_benchmark([5], 0.5, workers=0)
