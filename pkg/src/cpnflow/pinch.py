"""Scalar pinching arithmetic: projection Jacobians, pinching radii and the comparison ODE."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sympl_core import SingularSpectrum

# demonstration values for the curvature evolution constants; they only enter ODE examples
DEFAULT_K1 = 4.0
DEFAULT_K2 = 8.0


def _spectrum(spectrum) -> SingularSpectrum:
    return spectrum if isinstance(spectrum, SingularSpectrum) else SingularSpectrum(spectrum)


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return int(n)


def star_omega(spectrum) -> float:
    """Jacobian of the projection to the first factor, ``1 / prod (lam_i + lam_i')``."""
    lam = _spectrum(spectrum).lam
    return float(1.0 / np.prod(lam[0::2] + lam[1::2]))


def eps_from_lambda(n: int, Lambda: float) -> float:
    """Gap below ``2^-n`` that a Lambda-pinched spectrum can reach."""
    n = _check_n(n)
    if not Lambda > 1:
        raise ValueError(f"Lambda must exceed 1, got {Lambda}")
    s = math.sqrt(Lambda)
    return 2.0**-n - (s + 1.0 / s) ** -n


def lambda_from_eps(n: int, eps: float) -> float:
    """Pinching radius guaranteed by ``star_omega >= 2^-n - eps``."""
    n = _check_n(n)
    top = 2.0**-n
    if not 0 < eps < top:
        raise ValueError(f"eps must lie in (0, {top}), got {eps}")
    r = top / (top - eps)
    return (r + math.sqrt(r * r - 1.0)) ** 2


def _lambda1_formula(n: int, Lambda0: float) -> float:
    b = (0.5 * (math.sqrt(Lambda0) + 1.0 / math.sqrt(Lambda0))) ** (1.0 / n)
    return (b + math.sqrt(b * b - 1.0)) ** 2


def lambda1_from_lambda0(n: int, Lambda0: float) -> float:
    """Initial pinching that keeps the flow inside the ``Lambda0`` box."""
    n = _check_n(n)
    if n == 1:
        raise ValueError("n = 1 needs no pinching assumption: surfaces flow without it")
    if not Lambda0 > 1:
        raise ValueError(f"Lambda0 must exceed 1, got {Lambda0}")
    return _lambda1_formula(n, Lambda0)


def curvature_sum(spectrum) -> float:
    """``sum over pairs of (1 - lam^2)^2 / (1 + lam^2)^2`` using the first member of each pair."""
    lam = _spectrum(spectrum).lam[0::2]
    l2 = lam * lam
    return float(np.sum(((1.0 - l2) / (1.0 + l2)) ** 2))


@dataclass(frozen=True)
class LogComparison:
    c: float
    inequality_holds: bool
    worst_margin: float
    x_max: float


def log_comparison(Lambda0: float, grid_steps: int = 10001, margin_tol: float = -1e-12) -> LogComparison:
    """Check ``(x - 4)/x >= c (ln x / 2 - ln 2)`` on ``[4, (sqrt L + 1/sqrt L)^2]``."""
    if not Lambda0 > 1:
        raise ValueError(f"Lambda0 must exceed 1, got {Lambda0}")
    if grid_steps < 2:
        raise ValueError("grid_steps must be at least 2")
    s = math.sqrt(Lambda0)
    x_max = (s + 1.0 / s) ** 2
    c = 8.0 / x_max
    x = np.linspace(4.0, x_max, int(grid_steps))
    margin = (x - 4.0) / x - c * (0.5 * np.log(x) - math.log(2.0))
    worst = float(margin.min())
    return LogComparison(c, worst >= margin_tol, worst, x_max)


@dataclass(frozen=True)
class PinchingParams:
    """Constants of the pinching argument for one dimension."""

    n: int
    Lambda0: float
    Lambda1: float
    delta: float
    eps: float
    c: float
    K1: float = DEFAULT_K1
    K2: float = DEFAULT_K2
    C0: float = 0.0

    def __post_init__(self):
        if math.isfinite(self.Lambda0) and not self.Lambda1 < self.Lambda0:
            raise ValueError("Lambda1 must be below Lambda0")
        if not 0 < self.eps < 2.0**-self.n:
            raise ValueError("eps outside (0, 2^-n)")
        if self.delta <= 0 or self.c <= 0 or self.K1 <= 0 or self.K2 <= 0:
            raise ValueError("delta, c, K1, K2 must be positive")
        if not 0 < self.C0 <= 2.0**-self.n:
            raise ValueError("C0 must lie in (0, 2^-n]")

    @classmethod
    def from_lambda0(cls, n: int, Lambda0: float, delta: float, K1=DEFAULT_K1, K2=DEFAULT_K2) -> "PinchingParams":
        L1 = lambda1_from_lambda0(n, Lambda0)
        eps = eps_from_lambda(n, L1)
        return cls(n, Lambda0, L1, delta, eps, log_comparison(Lambda0, 2).c, K1, K2, 2.0**-n - eps)


def _ode_coeff(K1, K2, delta, C0, eps) -> float:
    for name, v in (("K1", K1), ("K2", K2), ("delta", delta), ("C0", C0), ("eps", eps)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    a = delta * C0 - eps * K1
    if not a > 0:
        raise ValueError(f"delta*C0 - eps*K1 = {a} must be positive")
    return a


def comparison_ode_rhs(y, K1, K2, delta, C0, eps):
    """Right-hand side ``-(delta C0 - eps K1) y^2 + K2 y``."""
    a = _ode_coeff(K1, K2, delta, C0, eps)
    return -a * y * y + K2 * y


def comparison_ode(K1, K2, delta, C0, eps, y0, t):
    """Closed-form solution of the logistic comparison ODE at time(s) ``t``.

    Written as ``y* / (1 - exp(-K2 t) / K)`` with ``y* = K2 / a`` and
    ``K = y0 / (y0 - y*)``, which avoids overflow for large ``t``.
    """
    a = _ode_coeff(K1, K2, delta, C0, eps)
    if not y0 > 0:
        raise ValueError("y0 must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    ystar = K2 / a
    if y0 == ystar:
        y = np.full_like(t, ystar)
    else:
        inv_K = (y0 - ystar) / y0
        y = ystar / (1.0 - np.exp(-K2 * t) * inv_K)
    return float(y) if y.ndim == 0 else y
