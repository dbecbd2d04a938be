"""Random-phase model of the Z'(t) main sum.

Each phase phi_n is drawn independently and uniformly on [-pi, pi], giving

    Phi1(t) = 2 sum_{n<P} n^{-1/2} ln(P/n) cos(theta(t) - t ln n + pi/2 + phi_n),
    Phi2    = int_T^{T+U} sqrt(1 + Phi1(t)^2) dt.

Phases come from a counter-based Philox stream keyed by (master_seed,
sample index); phi_n is the n-th draw of that stream, so a sample never
depends on batch layout or worker count. Monte Carlo values are stored by
sample index and reduced with ``math.fsum``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import riemann_core
from .riemann_core import _terms, phases
from .window import DomainError, EvalWindow, QuadratureError

# Mean of |cos^3| over a period.
ABS_COS_CUBED_MEAN = 4.0 / (3.0 * math.pi)
KS_THRESHOLD = 0.05  # calibrated at P = 200, N = 1e4; finite-P CLT quality, not a limit value
MAX_FAILURE_FRACTION = 0.01


@dataclass(frozen=True)
class McConfig:
    sample_count: int
    master_seed: int = 20240917
    batch_size: int = 4096
    workers: int = 1

    def __post_init__(self):
        if self.sample_count < 2:
            raise DomainError("sample_count must be >= 2 for a variance")
        if self.batch_size < 1 or self.workers < 1:
            raise DomainError("batch_size and workers must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class PhaseSample:
    phases: np.ndarray
    seed_path: tuple[int, int]


@dataclass(frozen=True)
class McEstimate:
    mean: float
    variance: float
    std_error: float
    count: int
    failures: int = 0

    @classmethod
    def from_values(cls, values: np.ndarray, failures: int = 0) -> "McEstimate":
        values = np.asarray(values, dtype=float)
        n = values.size
        mean = math.fsum(values) / n
        var = math.fsum((values - mean) ** 2) / (n - 1)
        return cls(mean, var, math.sqrt(var / n), n, failures)


def variance_std_error(values: np.ndarray) -> float:
    """Standard error of the sample variance, sqrt((m4 - s^4) / N)."""
    values = np.asarray(values, dtype=float)
    n = values.size
    dev2 = (values - math.fsum(values) / n) ** 2
    m2 = math.fsum(dev2) / n
    m4 = math.fsum(dev2 * dev2) / n
    return math.sqrt(max(m4 - m2 * m2, 0.0) / n)


def _phase_vector(master_seed: int, index: int, n_terms: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=[master_seed, index]))
    return gen.random(n_terms) * (2.0 * math.pi) - math.pi


def sample_phases(window: EvalWindow, config: McConfig, index: int) -> PhaseSample:
    if not 0 <= index < config.sample_count:
        raise DomainError(f"sample index {index} outside [0, {config.sample_count})")
    phases = _phase_vector(config.master_seed, index, window.n_terms)
    return PhaseSample(phases, (config.master_seed, index))


def _phase_block(window: EvalWindow, config: McConfig, start: int, stop: int) -> np.ndarray:
    return np.stack([_phase_vector(config.master_seed, i, window.n_terms) for i in range(start, stop)])


def phi1(t, sample: PhaseSample, window: EvalWindow, *, scale: float = 1.0):
    """One realization of the randomized Z' sum at t (scalar or array)."""
    terms = _terms(window.P)
    if sample.phases.shape != terms.n.shape:
        raise DomainError(
            f"phase vector has {sample.phases.size} entries, window needs {terms.n.size}"
        )
    window.check_contains(t)
    arg = phases(t, window) + math.pi / 2 + sample.phases
    vals = (np.cos(arg) * (terms.amp_z1 * scale)).sum(axis=1)
    return float(vals[0]) if np.ndim(t) == 0 else vals


def variance_exact(window: EvalWindow) -> float:
    """2 sum_{n<P} ln^2(P/n) / n."""
    terms = _terms(window.P)
    lr = window.log_P - terms.log_n
    return 2.0 * math.fsum(lr * lr / terms.n)


def variance_asymptotic(window: EvalWindow) -> float:
    return 2.0 / 3.0 * window.log_P**3


def _cube_log_sum(window: EvalWindow) -> float:
    terms = _terms(window.P)
    lr = window.log_P - terms.log_n
    return math.fsum(lr**3 / terms.n**1.5)


def third_moment_sum(window: EvalWindow) -> float:
    """sum_{n<P} E|X_n|^3 = (32 / 3pi) sum n^{-3/2} ln^3(P/n)."""
    return 8.0 * ABS_COS_CUBED_MEAN * _cube_log_sum(window)


def third_moment_bound(window: EvalWindow) -> float:
    """Cruder bound 8 sum n^{-3/2} ln^3(P/n)."""
    return 8.0 * _cube_log_sum(window)


def lyapunov_ratio(window: EvalWindow) -> float:
    """Third absolute moments over B_P^3, with B_P^2 the exact variance."""
    return third_moment_sum(window) / variance_exact(window) ** 1.5


def _map_batches(fn, config: McConfig) -> np.ndarray:
    """Run ``fn(start, stop) -> values`` over index batches; results in index order."""
    bounds = [
        (s, min(s + config.batch_size, config.sample_count))
        for s in range(0, config.sample_count, config.batch_size)
    ]
    if config.workers == 1:
        parts = [fn(a, b) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), bounds))
    return np.concatenate(parts)


def phi1_samples(t: float, window: EvalWindow, config: McConfig) -> np.ndarray:
    """Phi1(t) for sample indices 0 .. sample_count-1."""
    window.check_contains(t)
    terms = _terms(window.P)
    base = phases(t, window)[0] + math.pi / 2

    def batch(start, stop):
        return (np.cos(base + _phase_block(window, config, start, stop)) * terms.amp_z1).sum(axis=1)

    return _map_batches(batch, config)


def mc_moments(t: float, window: EvalWindow, config: McConfig) -> McEstimate:
    return McEstimate.from_values(phi1_samples(t, window, config))


def ks_distance(samples: np.ndarray, variance: float) -> float:
    return float(stats.kstest(samples, stats.norm(scale=math.sqrt(variance)).cdf).statistic)


def distribution_check(
    t: float, window: EvalWindow, config: McConfig, *, variance: float | None = None
) -> float:
    """KS distance of Phi1(t) samples to N(0, variance_exact) (or ``variance``)."""
    if config.sample_count < 1000:
        raise DomainError("distribution_check needs at least 1000 samples")
    var = variance_exact(window) if variance is None else variance
    return ks_distance(phi1_samples(t, window, config), var)


def phi2_values(
    window: EvalWindow,
    config: McConfig,
    *,
    scale: float = 1.0,
    tol: float | None = None,
    c: float = 0.5,
    max_depth: int = 30,
) -> tuple[np.ndarray, int]:
    """Per-sample Phi2 values (NaN for failed quadratures) and the failure count."""

    def one(index):
        sample = sample_phases(window, config, index)
        try:
            return riemann_core.arc_integral(
                lambda tt: phi1(tt, sample, window, scale=scale), window, c=c, tol=tol, max_depth=max_depth
            ).value
        except QuadratureError:
            return math.nan

    values = _map_batches(lambda a, b: np.array([one(i) for i in range(a, b)]), config)
    return values, int(np.isnan(values).sum())


def phi2_mc(window: EvalWindow, config: McConfig, **kwargs) -> McEstimate:
    """Monte Carlo estimate of E(Phi2) over the window.

    Failed realizations are dropped and counted; more than 1% failures is an
    error.
    """
    values, failures = phi2_values(window, config, **kwargs)
    ok = values[~np.isnan(values)]
    if failures > MAX_FAILURE_FRACTION * config.sample_count:
        raise QuadratureError(
            f"{failures} of {config.sample_count} Phi2 quadratures failed",
            partial=math.fsum(ok) / ok.size if ok.size else math.nan,
            achieved=math.nan,
        )
    return McEstimate.from_values(ok, failures)
