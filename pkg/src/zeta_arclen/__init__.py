"""Arc length of the Riemann Z(t)-curve: evaluators, random-phase model, Gaussian closed forms."""

__version__ = "0.1.0"

from .window import T_MIN, ConsistencyError, DomainError, EvalWindow, QuadratureError  # noqa: E402

__all__ = [
    "T_MIN",
    "ConsistencyError",
    "DomainError",
    "EvalWindow",
    "QuadratureError",
    "__version__",
]
