"""Evaluation window (T, U) with its frozen truncation point P, and shared errors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

T_MIN = 100.0
TWO_PI = 2.0 * math.pi


class DomainError(ValueError):
    """An argument lies outside the region where an evaluator is valid."""


class ConsistencyError(ArithmeticError):
    """Two independent numerical routes disagree beyond their error budget."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its refinement limit.

    ``partial`` is the best available estimate and ``achieved`` the error
    estimate that was reached instead of the requested tolerance.
    """

    def __init__(self, message: str, partial: float, achieved: float):
        super().__init__(message)
        self.partial = partial
        self.achieved = achieved


@dataclass(frozen=True)
class EvalWindow:
    """The interval [T, T + U] together with the truncation point P.

    P defaults to sqrt(T / 2pi) and is held fixed over the whole window.
    """

    T: float
    U: float
    P: float | None = None
    t_min: float = field(default=T_MIN, compare=False)

    def __post_init__(self):
        T, U = float(self.T), float(self.U)
        if not math.isfinite(T) or T < self.t_min:
            raise DomainError(f"T={T!r} below the asymptotic guard t_min={self.t_min}")
        if not (U > 0.0) or U > math.sqrt(T):
            raise DomainError(f"U={U!r} must satisfy 0 < U <= sqrt(T)={math.sqrt(T):.6g}")
        P = math.sqrt(T / TWO_PI) if self.P is None else float(self.P)
        if not P > 1.0:
            raise DomainError(f"truncation point P={P!r} must exceed 1")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "P", P)

    @classmethod
    def from_truncation(cls, P: float, U: float | None = None) -> "EvalWindow":
        """Window whose start is T = 2pi P^2, keeping ``P`` exactly as given."""
        T = TWO_PI * P * P
        if U is None:
            U = min(1.0, math.sqrt(T))
        return cls(T, U, P=P, t_min=0.0)

    @property
    def end(self) -> float:
        return self.T + self.U

    @property
    def log_P(self) -> float:
        return math.log(self.P)

    @property
    def n_terms(self) -> int:
        """Number of integers n with 1 <= n < P."""
        return math.ceil(self.P) - 1

    def check_contains(self, t) -> None:
        t = np.asarray(t, dtype=float)
        if t.size and (t.min() < self.T or t.max() > self.end):
            raise DomainError(
                f"t outside window [{self.T!r}, {self.end!r}]; P would be stale"
            )
