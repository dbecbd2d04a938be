"""Exit criteria for the whole artifact, with fixed seeds and pinned tolerances.

Each criterion returns a CriterionResult whose ``values`` hold the measured
numbers; ``run_suite`` collects them and ``verify`` adds the determinism
check by rerunning the suite with several worker threads.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import riemann_core as rc
from . import special_fn as sf
from . import stochastic_model as sm
from .window import EvalWindow

DEFAULT_SEED = 1


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    values: dict
    budget_s: float
    elapsed_s: float = 0.0
    error: str | None = None
    numeric_ok: bool = False

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = self.error or ", ".join(f"{k}={_short(v)}" for k, v in self.values.items() if not isinstance(v, (list, dict)))
        return f"[{status}] {self.number}. {self.name} ({self.elapsed_s:.2f}s / {self.budget_s:g}s): {detail}"


def _short(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _log_window(log_T: float, U: float = 1.0) -> EvalWindow:
    return EvalWindow(math.exp(log_T), U)


def bessel_identity() -> tuple[bool, dict]:
    rel = {}
    for beta in (1.0, 0.1, 0.01, 0.001):
        q = sf.f_of_beta_quad(beta)
        rel[str(beta)] = abs(sf.f_of_beta_closed(beta) - q) / q
    worst = max(rel.values())
    return worst <= 1e-8, {"max_rel_diff": worst, "rel_diff": rel}


def f_asymptotics() -> tuple[bool, dict]:
    ratios = {}
    for L in (10.0, 20.0, 50.0):
        beta = 3.0 / (4.0 * L**3)
        ratios[str(L)] = abs(sf.f_of_beta_closed(beta) - 2.0 / 3.0 * L**3) / math.log(L)
    C = max(ratios.values())
    small = 2e-4 * sf.f_of_beta_closed(1e-4)
    ok = C <= 10.0 and abs(small - 1.0) <= 1e-3
    return ok, {"fitted_C": C, "ratio_over_loglogP": ratios, "two_beta_F_at_1e-4": small}


def lemma_constant() -> tuple[bool, dict]:
    ratios = {}
    for log_T in (20.0, 50.0, 100.0, 200.0):
        w = _log_window(log_T)
        ratios[str(log_T)] = sf.e_inf_point(w) * math.sqrt(6 * math.pi) / log_T**1.5
    gaps = [abs(1.0 - r) for r in ratios.values()]
    improving = all(b < a for a, b in zip(gaps, gaps[1:]))
    at100 = ratios["100.0"]
    return (0.98 <= at100 <= 1.02) and improving, {"ratio_at_lnT_100": at100, "ratios": ratios, "improving": improving}


def variance_lemma(seed: int, workers: int) -> tuple[bool, dict]:
    w = EvalWindow.from_truncation(100.0)
    cfg = sm.McConfig(200_000, seed, workers=workers)
    x = sm.phi1_samples(w.T, w, cfg)
    est = sm.McEstimate.from_values(x)
    se_var = sm.variance_std_error(x)
    exact = sm.variance_exact(w)
    z_var = (est.variance - exact) / se_var
    part_a = abs(z_var) <= 3.0
    r2 = sm.variance_exact(w) / sm.variance_asymptotic(w)
    w4 = EvalWindow.from_truncation(1e4)
    r4 = sm.variance_exact(w4) / sm.variance_asymptotic(w4)
    part_b = 0.8 <= r4 <= 1.2 and abs(r4 - 1) < abs(r2 - 1)
    return part_a and part_b, {
        "mc_variance": est.variance,
        "variance_exact": exact,
        "variance_se": se_var,
        "variance_z": z_var,
        "mc_mean": est.mean,
        "mean_z": est.mean / est.std_error,
        "ratio_P1e2": r2,
        "ratio_P1e4": r4,
    }


def lyapunov() -> tuple[bool, dict]:
    grid = (1e2, 1e3, 1e4, 1e5, 1e6)
    ratios = [sm.lyapunov_ratio(EvalWindow.from_truncation(P)) for P in grid]
    scaled = [r * math.log(P) ** 1.5 for r, P in zip(ratios, grid)]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    return decreasing and max(scaled) <= 20.0, {
        "ratios": ratios,
        "scaled_max": max(scaled),
        "strictly_decreasing": decreasing,
    }


def clt_quality(seed: int, workers: int) -> tuple[bool, dict]:
    w = EvalWindow(1e6, 1.0, P=200.0)
    ks = sm.distribution_check(w.T, w, sm.McConfig(10_000, seed, workers=workers))
    return ks <= sm.KS_THRESHOLD, {"ks": ks, "threshold": sm.KS_THRESHOLD}


def arc_identity() -> tuple[bool, dict]:
    w = EvalWindow(1e6, 50.0)
    rep = rc.arc_length_numeric(w)
    expected = 50.0 / (2 * math.pi) * math.log(1e6 / (2 * math.pi))
    zeros = rep.zero_count()
    ok = 0.0 < rep.residual < 50.0 + 2.0 and abs(zeros - expected) <= 5.0
    return ok, {
        "L_numeric": rep.L_numeric,
        "extrema_sum": rep.extrema_sum,
        "residual": rep.residual,
        "quad_error_estimate": rep.quad_error_estimate,
        "zero_count": zeros,
        "expected_zero_count": expected,
        "scan_warnings": rep.warnings,
    }


def model_closure(seed: int, workers: int) -> tuple[bool, dict]:
    w = EvalWindow(1e6, 1.0)
    est = sm.phi2_mc(w, sm.McConfig(200, seed, workers=workers))
    closed = sf.e_inf_phi2(w)
    asym = sf.theorem_asymptotic(1e6, 1.0)
    z = (est.mean - closed) / est.std_error
    return abs(z) <= 3.0, {
        "phi2_mc_mean": est.mean,
        "phi2_mc_std_error": est.std_error,
        "e_inf_phi2": closed,
        "z_score": z,
        "theorem_asymptotic": asym,
        "mc_over_asymptotic": est.mean / asym,
        "closed_over_asymptotic": closed / asym,
        "failures": est.failures,
    }


def _criteria(seed: int, workers: int) -> list[tuple[int, str, float, Callable]]:
    return [
        (1, "Bessel identity for F(beta)", 1.0, bessel_identity),
        (2, "F(beta) asymptotics", 1.0, f_asymptotics),
        (3, "point-expectation constant 1/sqrt(6 pi)", 1.0, lemma_constant),
        (4, "variance of Phi1", 30.0, lambda: variance_lemma(seed, workers)),
        (5, "Lyapunov ratio", 5.0, lyapunov),
        (6, "CLT quality (KS)", 10.0, lambda: clt_quality(seed, workers)),
        (7, "arc-length identity", 60.0, arc_identity),
        (8, "model closure E(Phi2)", 300.0, lambda: model_closure(seed, workers)),
    ]


def run_suite(seed: int = DEFAULT_SEED, workers: int = 1, only: set[int] | None = None) -> list[CriterionResult]:
    results = []
    for number, name, budget, fn in _criteria(seed, workers):
        if only is not None and number not in only:
            continue
        t0 = time.perf_counter()
        try:
            ok, values = fn()
            error = None
        except Exception as exc:  # a crash is a failed criterion, reported as such
            ok, values, error = False, {}, f"{type(exc).__name__}: {exc}"
        elapsed = time.perf_counter() - t0
        results.append(
            CriterionResult(number, name, bool(ok and elapsed < budget), values, budget, elapsed, error, bool(ok))
        )
    return results


def numeric_payload(results: list[CriterionResult]) -> str:
    body = [{"number": r.number, "ok": r.numeric_ok, "values": r.values, "error": r.error} for r in results]
    return json.dumps(body, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(type(obj).__name__)


def determinism(seed: int, first: list[CriterionResult], workers: int) -> CriterionResult:
    """Rerun the suite with ``workers`` threads; payload must match byte for byte."""
    t0 = time.perf_counter()
    again = run_suite(seed, workers=workers, only={r.number for r in first})
    same = numeric_payload(first) == numeric_payload(again)
    return CriterionResult(
        9,
        "determinism across worker counts",
        same,
        {"workers_compared": [1, workers], "identical": same},
        budget_s=600.0,
        elapsed_s=time.perf_counter() - t0,
        numeric_ok=same,
    )


def verify(seed: int = DEFAULT_SEED, workers: int = 4) -> list[CriterionResult]:
    first = run_suite(seed, workers=1)
    return first + [determinism(seed, first, workers)]
