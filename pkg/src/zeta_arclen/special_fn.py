"""Digamma, modified Bessel I0/K0/K1 and the Gaussian expectation chain.

The central object is

    F(beta) = int_0^inf sqrt(1 + x^2) exp(-beta x^2) dx
            = 1/4 exp(beta/2) [K0(beta/2) + K1(beta/2)],

which gives the expectation of sqrt(1 + X^2) for a centred Gaussian X with
variance 1/(2 beta) = (2/3) ln^3 P, and from it the statistical arc length.

K0 and K1 are evaluated by their small-argument power series for
z <= Z_SWITCH and by the integral int_0^inf exp(-z cosh t) cosh(nu t) dt
otherwise; in the overlap [0.1, 2] both are computed and must agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .window import T_MIN, ConsistencyError, DomainError, EvalWindow

EULER_GAMMA = 0.57721566490153286060651209008240243
Z_SWITCH = 1.0
OVERLAP = (0.1, 2.0)
CONSISTENCY_RTOL = 1e-8
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class BesselEval:
    value: float
    method: str  # "series" or "schlafli_quadrature"
    est_error: float


def digamma(m: int) -> float:
    """psi(m) for a positive integer m, from psi(1) = -gamma and psi(m+1) = psi(m) + 1/m."""
    if int(m) != m or m < 1:
        raise DomainError(f"digamma defined here for integers m >= 1, got {m!r}")
    return -EULER_GAMMA + math.fsum(1.0 / k for k in range(1, int(m)))


def _series(term0: float, ratio, limit: int = 500) -> tuple[float, float, float]:
    """Sum terms t_0 = term0, t_{m+1} = t_m * ratio(m) until stagnation.

    Returns (sum, sum of |terms|, last |term|).
    """
    terms = [term0]
    t = term0
    for m in range(limit):
        t *= ratio(m)
        terms.append(t)
        if abs(t) <= _EPS * abs(math.fsum(terms)) * 1e-3 or t == 0.0:
            break
    return math.fsum(terms), math.fsum(abs(x) for x in terms), abs(terms[-1])


def bessel_i0(z: float) -> float:
    """I0(z) = sum (z/2)^{2m} / (m!)^2."""
    if z < 0:
        raise DomainError("bessel_i0 needs z >= 0")
    q = 0.25 * z * z
    return _series(1.0, lambda m: q / ((m + 1) * (m + 1)))[0]


def _bessel_i1(z: float) -> float:
    q = 0.25 * z * z
    return _series(0.5 * z, lambda m: q / ((m + 1) * (m + 2)))[0]


def _k0_series(z: float) -> BesselEval:
    # K0 = -(ln(z/2)) I0 + sum_{m>=0} psi(m+1) (z^2/4)^m / (m!)^2
    q = 0.25 * z * z
    terms = []
    c = 1.0
    psi = -EULER_GAMMA
    for m in range(200):
        terms.append(c * psi)
        c *= q / ((m + 1) * (m + 1))
        psi += 1.0 / (m + 1)
        if c * abs(psi) <= _EPS * 1e-3 * max(abs(terms[0]), 1.0):
            break
    s = math.fsum(terms)
    log_part = -math.log(0.5 * z) * bessel_i0(z)
    value = log_part + s
    err = 8 * _EPS * (abs(log_part) + math.fsum(abs(x) for x in terms)) + abs(c * psi)
    return BesselEval(value, "series", err)


def _k1_series(z: float) -> BesselEval:
    # K1 = 1/z + ln(z/2) I1 - (z/4) sum_{m>=0} [psi(m+1) + psi(m+2)] (z^2/4)^m / (m!(m+1)!)
    q = 0.25 * z * z
    terms = []
    c = 1.0
    psi1, psi2 = -EULER_GAMMA, 1.0 - EULER_GAMMA
    for m in range(200):
        terms.append(c * (psi1 + psi2))
        c *= q / ((m + 1) * (m + 2))
        psi1 += 1.0 / (m + 1)
        psi2 += 1.0 / (m + 2)
        if c * abs(psi1 + psi2) <= _EPS * 1e-3 * max(abs(terms[0]), 1.0):
            break
    tail = -0.25 * z * math.fsum(terms)
    log_part = math.log(0.5 * z) * _bessel_i1(z)
    value = 1.0 / z + log_part + tail
    err = 8 * _EPS * (1.0 / z + abs(log_part) + abs(tail)) + 0.25 * z * abs(c * (psi1 + psi2))
    return BesselEval(value, "series", err)


def bessel_k_schlafli(nu: int, z: float, *, rtol: float = 1e-13) -> BesselEval:
    """K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt by adaptive quadrature."""
    if not z > 0:
        raise DomainError("K_nu needs z > 0")
    # beyond t_max the integrand is below exp(-45) of its scale
    t_max = math.acosh(45.0 / z + 1.0) + 1.0
    edges = np.linspace(0.0, t_max, 33)

    def f(t):
        return np.exp(-z * np.cosh(t)) * np.cosh(nu * t)

    res = quadrature.integrate(f, edges, tol_rel=rtol, max_depth=40)
    return BesselEval(res.value, "schlafli_quadrature", res.error)


def _bessel_k(nu: int, z: float, series) -> BesselEval:
    if not z > 0:
        raise DomainError(f"K{nu} needs z > 0, got {z!r}")
    primary = series(z) if z <= Z_SWITCH else bessel_k_schlafli(nu, z)
    if OVERLAP[0] <= z <= OVERLAP[1]:
        other = bessel_k_schlafli(nu, z) if primary.method == "series" else series(z)
        if abs(primary.value - other.value) > CONSISTENCY_RTOL * abs(other.value):
            raise ConsistencyError(
                f"K{nu}({z!r}): series and integral routes disagree "
                f"({primary.value!r} vs {other.value!r})"
            )
    return primary


def bessel_k0(z: float) -> BesselEval:
    return _bessel_k(0, z, _k0_series)


def bessel_k1(z: float) -> BesselEval:
    return _bessel_k(1, z, _k1_series)


def f_of_beta_quad(beta: float) -> float:
    """F(beta) by direct quadrature.

    With x = u / sqrt(beta), F = (1/beta) int_0^inf sqrt(beta + u^2) exp(-u^2) du;
    the Gaussian tail beyond u = 9 is below 1e-34.
    """
    if not beta > 0:
        raise DomainError("F(beta) needs beta > 0")
    u_max = 9.0
    s = math.sqrt(beta)
    # geometric breakpoints through the sqrt(beta) kink scale
    inner = [s * 2.0**k for k in range(-4, 60) if s * 2.0**k < u_max]
    edges = np.array([0.0] + inner + [u_max])

    def g(u):
        return np.sqrt(beta + u * u) * np.exp(-u * u)

    res = quadrature.integrate(g, edges, tol_rel=1e-14, max_depth=40)
    return res.value / beta


def f_of_beta_closed(beta: float) -> float:
    """F(beta) = exp(beta/2) [K0(beta/2) + K1(beta/2)] / 4."""
    if not beta > 0:
        raise DomainError("F(beta) needs beta > 0")
    z = 0.5 * beta
    return 0.25 * math.exp(z) * (bessel_k0(z).value + bessel_k1(z).value)


def beta_of(window: EvalWindow) -> float:
    """Gaussian exponent 3 / (4 ln^3 P)."""
    return 3.0 / (4.0 * window.log_P**3)


def log_P_from_T(T: float) -> float:
    """ln P = (ln T - ln 2pi) / 2, exact for P = sqrt(T / 2pi)."""
    return 0.5 * (math.log(T) - math.log(2.0 * math.pi))


def log_P_asymptotic_from_T(T: float) -> float:
    """ln P ~ ln T / 2, the leading-order replacement."""
    return 0.5 * math.log(T)


def gaussian_density(x, window: EvalWindow):
    """Normalized density sqrt(beta/pi) exp(-beta x^2), variance (2/3) ln^3 P."""
    beta = beta_of(window)
    return math.sqrt(beta / math.pi) * np.exp(-beta * np.asarray(x, dtype=float) ** 2)


def e_inf_point(window: EvalWindow) -> float:
    """Gaussian-model expectation of sqrt(1 + Phi1^2) at any t in the window."""
    L = window.log_P
    if not L > 1.0:
        raise DomainError("e_inf_point needs P > e")
    return math.sqrt(3.0 / math.pi) * L**-1.5 * f_of_beta_closed(beta_of(window))


def e_inf_phi2(window: EvalWindow) -> float:
    """Statistical arc length: U times the (t-independent) point expectation."""
    return window.U * e_inf_point(window)


def theorem_asymptotic(T: float, U: float, *, t_min: float = T_MIN) -> float:
    """U ln^{3/2} T / sqrt(6 pi)."""
    if not T >= t_min:
        raise DomainError(f"T={T!r} below t_min={t_min}")
    if not (0.0 < U <= math.sqrt(T)):
        raise DomainError(f"U={U!r} must satisfy 0 < U <= sqrt(T)")
    return U * math.log(T) ** 1.5 / math.sqrt(6.0 * math.pi)


@dataclass(frozen=True)
class PredictionReport:
    window: EvalWindow
    beta: float
    f_closed: float
    f_quad: float
    e_inf_point: float
    e_inf_arc: float
    theorem_asymptotic: float

    @property
    def ratio_to_asymptotic(self) -> float:
        return self.e_inf_arc / self.theorem_asymptotic


def predict(window: EvalWindow) -> PredictionReport:
    beta = beta_of(window)
    point = e_inf_point(window)
    return PredictionReport(
        window=window,
        beta=beta,
        f_closed=f_of_beta_closed(beta),
        f_quad=f_of_beta_quad(beta),
        e_inf_point=point,
        e_inf_arc=window.U * point,
        theorem_asymptotic=theorem_asymptotic(window.T, window.U, t_min=window.t_min),
    )
