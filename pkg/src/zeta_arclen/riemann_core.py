"""Deterministic evaluators for the Hardy function Z(t) and its derivative.

Z is approximated by the Riemann-Siegel main sum (no correction terms)

    Z(t)  ~ 2 sum_{n<P} n^{-1/2} cos(theta(t) - t ln n)
    Z'(t) ~ 2 sum_{n<P} n^{-1/2} ln(P/n) cos(theta(t) - t ln n + pi/2)

with P frozen at sqrt(T/2pi) over a window [T, T+U]. On top of these sit the
critical-point scanner, the arc length integral of sqrt(1 + Z'^2) and the
extrema sum 2 sum |Z(t0)| over zeros t0 of Z'.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable

import numpy as np

from . import quadrature
from .window import T_MIN, TWO_PI, DomainError, EvalWindow

# Elements per (t x n) block when evaluating the sums; bounds peak memory.
_BLOCK = 1 << 20

ZERO_TOLERANCE = 1e-7
DERIV_TOLERANCE = 1e-6


class CriticalPointWarning(UserWarning):
    """Two points of one kind closer than the scan step survived all rescans."""


def theta(t, *, t_min: float = T_MIN):
    """Riemann-Siegel theta function by its large-t asymptotic expansion.

    Terms through 7/(5760 t^3) are kept; the first omitted term is below
    4e-14 for t >= 100.
    """
    t = np.asarray(t, dtype=float)
    if t.size and t.min() < t_min:
        raise DomainError(f"theta expansion used below t_min={t_min}")
    out = 0.5 * t * np.log(t / TWO_PI) - 0.5 * t - math.pi / 8 + 1.0 / (48.0 * t) + 7.0 / (5760.0 * t**3)
    return out[()] if out.ndim == 0 else out


def theta_prime(t):
    t = np.asarray(t, dtype=float)
    out = 0.5 * np.log(t / TWO_PI) - 1.0 / (48.0 * t * t) - 7.0 / (1920.0 * t**4)
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class RiemannSeriesTerm:
    n: int
    amplitude: float
    log_n: float


@dataclass(frozen=True)
class _Terms:
    n: np.ndarray
    log_n: np.ndarray
    amp_z: np.ndarray
    amp_z1: np.ndarray


@lru_cache(maxsize=64)
def _terms(P: float) -> _Terms:
    n = np.arange(1, math.ceil(P), dtype=float)
    log_n = np.log(n)
    amp_z = 2.0 / np.sqrt(n)
    amp_z1 = amp_z * (math.log(P) - log_n)
    for arr in (n, log_n, amp_z, amp_z1):
        arr.flags.writeable = False
    return _Terms(n, log_n, amp_z, amp_z1)


def series_terms(window: EvalWindow, kind: str = "z1") -> list[RiemannSeriesTerm]:
    """Per-term amplitudes and frequencies; ``kind`` is ``"z"`` or ``"z1"``."""
    terms = _terms(window.P)
    amps = {"z": terms.amp_z, "z1": terms.amp_z1}[kind]
    return [RiemannSeriesTerm(int(n), float(a), float(l)) for n, a, l in zip(terms.n, amps, terms.log_n)]


# Cody-Waite split of 2pi: _C1 has 27 significant bits, so k * _C1 is exact
# for |k| < 2**26 (|x| up to ~4e8); _C2 + _C3 carry the rest of 2pi.
_C1 = 6.283185303211212
_C2 = 3.968374073792802e-09
_C3 = 2.4492935982947064e-16


def reduce_phase(x: np.ndarray) -> np.ndarray:
    """x - 2pi k with k = round(x / 2pi), so later shifts act on O(1) arguments."""
    k = np.round(x * (1.0 / TWO_PI))
    return ((x - k * _C1) - k * _C2) - k * _C3


def _phases(t: np.ndarray, log_n: np.ndarray, t_min: float) -> np.ndarray:
    return reduce_phase(theta(t, t_min=t_min)[:, None] - t[:, None] * log_n[None, :])


def phases(t, window: EvalWindow) -> np.ndarray:
    """Matrix of theta(t) - t ln n reduced mod 2pi, shape (len(t), n_terms)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    return _phases(t, _terms(window.P).log_n, window.t_min)


def _trig_sum(t, window: EvalWindow, amp: np.ndarray, shift: float, func: Callable) -> np.ndarray:
    """sum_n amp_n * func(theta(t) - t ln n + shift), blockwise over t."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    log_n = _terms(window.P).log_n
    out = np.empty(t.shape)
    step = max(1, _BLOCK // max(1, log_n.size))
    for i in range(0, t.size, step):
        chunk = t[i : i + step]
        out[i : i + step] = (func(_phases(chunk, log_n, window.t_min) + shift) * amp).sum(axis=1)
    return out


def _scalarize(t, values):
    return float(values[0]) if np.ndim(t) == 0 else values


def z_main(t, window: EvalWindow, *, scale: float = 1.0):
    """Main sum 2 sum_{n<P} n^{-1/2} cos(theta(t) - t ln n).

    Differs from the true Z(t) by O(t^{-1/4}).
    """
    window.check_contains(t)
    amp = _terms(window.P).amp_z * scale
    return _scalarize(t, _trig_sum(t, window, amp, 0.0, np.cos))


def z1(t, window: EvalWindow, *, form: str = "cos", scale: float = 1.0):
    """Main sum for Z'(t) with weights n^{-1/2} ln(P/n).

    ``form="cos"`` evaluates cos(x + pi/2), ``form="sin"`` the equivalent -sin(x).
    """
    window.check_contains(t)
    amp = _terms(window.P).amp_z1 * scale
    if form == "cos":
        vals = _trig_sum(t, window, amp, math.pi / 2, np.cos)
    elif form == "sin":
        vals = -_trig_sum(t, window, amp, 0.0, np.sin)
    else:
        raise ValueError(f"unknown form {form!r}")
    return _scalarize(t, vals)


class PointKind(str, Enum):
    ZERO = "zero_of_Z"
    EXTREMUM = "extremum_of_Z"


@dataclass(frozen=True)
class CriticalPoint:
    location: float
    kind: PointKind
    value_at: float


def scan_step(window: EvalWindow) -> float:
    """Quarter of the mean zero spacing, pi / (2 theta'(T))."""
    return math.pi / (2.0 * theta_prime(window.T))


def _sign_change_roots(f, grid: np.ndarray, values: np.ndarray, tol: float) -> np.ndarray:
    neg = np.signbit(values)
    idx = np.nonzero(neg[1:] != neg[:-1])[0]
    lo, hi = grid[idx].copy(), grid[idx + 1].copy()
    lo_neg = neg[idx].copy()
    while lo.size:
        width = hi - lo
        mid = lo + 0.5 * width
        active = (width > tol) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        m = mid[active]
        mneg = np.signbit(f(m))
        same = mneg == lo_neg[active]
        a_lo, a_hi = lo[active], hi[active]
        lo[active] = np.where(same, m, a_lo)
        hi[active] = np.where(same, a_hi, m)
    return lo + 0.5 * (hi - lo)


def _suspicious(zeros: np.ndarray, extrema: np.ndarray, step: float) -> list[str]:
    notes = []
    for name, pts in (("zero", zeros), ("extremum", extrema)):
        gaps = np.diff(pts)
        if gaps.size and gaps.min() < step:
            i = int(np.argmin(gaps))
            notes.append(f"{name} pair closer than scan step {step:.3g} near t={pts[i]!r}")
    if zeros.size >= 2:
        # Rolle: an extremum must lie between consecutive zeros
        between = np.searchsorted(extrema, zeros[1:]) - np.searchsorted(extrema, zeros[:-1])
        if np.any(between == 0):
            i = int(np.nonzero(between == 0)[0][0])
            notes.append(f"no extremum found between zeros near t={zeros[i]!r}")
    return notes


def scan_critical_points(
    window: EvalWindow,
    *,
    step: float | None = None,
    tol: float = 1e-10,
    max_refinements: int = 3,
    scale: float = 1.0,
) -> tuple[list[CriticalPoint], list[str]]:
    """Critical points plus the list of unresolved near-degeneracy notes."""
    step = scan_step(window) if step is None else step
    fz = lambda x: z_main(x, window, scale=scale)  # noqa: E731
    fd = lambda x: z1(x, window, scale=scale)  # noqa: E731
    for attempt in range(max_refinements + 1):
        n_cells = max(1, math.ceil(window.U / step))
        grid = np.linspace(window.T, window.end, n_cells + 1)
        zeros = _sign_change_roots(fz, grid, fz(grid), tol)
        extrema = _sign_change_roots(fd, grid, fd(grid), tol)
        notes = _suspicious(zeros, extrema, window.U / n_cells)
        if not notes or attempt == max_refinements:
            break
        step /= 2.0
    points = [CriticalPoint(float(x), PointKind.ZERO, float(v)) for x, v in zip(zeros, fz(zeros))]
    points += [CriticalPoint(float(x), PointKind.EXTREMUM, float(v)) for x, v in zip(extrema, fz(extrema))]
    points.sort(key=lambda p: p.location)
    return points, notes


def locate_critical_points(window: EvalWindow, **kwargs) -> list[CriticalPoint]:
    """All zeros of Z and of Z' in the window, bisected to width ``tol``.

    Emits CriticalPointWarning (does not fail) if possible misses remain.
    """
    points, notes = scan_critical_points(window, **kwargs)
    for note in notes:
        warnings.warn(note, CriticalPointWarning, stacklevel=2)
    return points


def extrema_sum(window: EvalWindow, points: list[CriticalPoint] | None = None, **kwargs) -> float:
    """2 * sum of |Z(t0)| over the extrema t0 in the window."""
    if points is None:
        points = locate_critical_points(window, **kwargs)
    return 2.0 * math.fsum(abs(p.value_at) for p in points if p.kind is PointKind.EXTREMUM)


def arc_integral(
    derivative: Callable[[np.ndarray], np.ndarray],
    window: EvalWindow,
    *,
    c: float = 0.5,
    tol: float | None = None,
    max_depth: int = 30,
) -> quadrature.QuadResult:
    """Integral of sqrt(1 + derivative(t)^2) over the window.

    The excess sqrt(1+y^2) - 1 = y^2 / (sqrt(1+y^2) + 1) >= 0 is integrated
    and U added back, so the result is never below U. Initial panels are at
    most c / theta'(T) wide to resolve each oscillation.
    """
    tol = 1e-6 * window.U if tol is None else tol
    width = c / theta_prime(window.T)
    edges = np.linspace(window.T, window.end, max(1, math.ceil(window.U / width)) + 1)

    def excess(t):
        y = derivative(t)
        y2 = y * y
        return y2 / (np.sqrt(1.0 + y2) + 1.0)

    res = quadrature.integrate(excess, edges, tol_abs=tol, max_depth=max_depth)
    return quadrature.QuadResult(window.U + res.value, res.error, res.n_evals, res.n_panels, res.depth)


@dataclass
class ArcLengthReport:
    window: EvalWindow
    L_numeric: float
    extrema_sum: float
    residual: float
    quad_error_estimate: float
    critical_points: list[CriticalPoint] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    quad_evals: int = 0

    @property
    def theta_proxy(self) -> float:
        """residual / U; expected in (0, 1) up to model and quadrature error."""
        return self.residual / self.window.U

    def zero_count(self) -> int:
        return sum(p.kind is PointKind.ZERO for p in self.critical_points)


def arc_length_numeric(
    window: EvalWindow,
    *,
    c: float = 0.5,
    tol: float | None = None,
    max_depth: int = 30,
    scale: float = 1.0,
    points: list[CriticalPoint] | None = None,
    scan_kwargs: dict | None = None,
) -> ArcLengthReport:
    """Arc length of y = Z(t) over the window, next to its extrema sum.

    ``points`` may carry a previously computed (e.g. cached) critical-point
    list; ``scale`` multiplies every series amplitude (0 gives the flat curve).
    """
    res = arc_integral(lambda t: z1(t, window, scale=scale), window, c=c, tol=tol, max_depth=max_depth)
    notes: list[str] = []
    if points is None:
        points, notes = scan_critical_points(window, scale=scale, **(scan_kwargs or {}))
    es = extrema_sum(window, points)
    assert res.value >= window.U, "arc length below window length"
    return ArcLengthReport(
        window=window,
        L_numeric=res.value,
        extrema_sum=es,
        residual=res.value - es,
        quad_error_estimate=res.error,
        critical_points=points,
        warnings=notes,
        quad_evals=res.n_evals,
    )
