"""Rockafellar-Uryasev update kernels and standard Gaussian utilities.

The VaR/ES pair of a loss ``X`` at level ``alpha`` is the (argmin, min) of

    V(xi) = xi + E[(X - xi)^+] / (1 - alpha)

and the stochastic-approximation schemes in :mod:`mlsa_risk.engine` are
driven by the two update kernels :func:`h1` and :func:`h2` defined here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "RiskLevel",
    "EstimatePair",
    "h1",
    "h2",
    "empirical_v",
    "std_normal_cdf",
    "std_normal_pdf",
    "std_normal_inv_cdf",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class RiskLevel:
    """Confidence level ``alpha`` of the VaR/ES pair."""

    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def tail_weight(self) -> float:
        """``1 / (1 - alpha)``."""
        return 1.0 / (1.0 - self.alpha)

    @property
    def k_alpha(self) -> float:
        """Bound on ``|H1|``: ``max(1, alpha / (1 - alpha))``.

        A VaR update therefore never moves the iterate by more than
        ``k_alpha * gamma``.
        """
        return max(1.0, self.alpha / (1.0 - self.alpha))


class EstimatePair(NamedTuple):
    """A (VaR, ES) couple, ``xi`` and ``chi``."""

    xi: float
    chi: float

    def is_finite(self) -> bool:
        return math.isfinite(self.xi) and math.isfinite(self.chi)


def h1(xi: float, x: float, level: RiskLevel) -> float:
    """VaR update kernel ``1 - 1{x >= xi} / (1 - alpha)``."""
    return 1.0 - level.tail_weight if x >= xi else 1.0


def h2(xi: float, chi: float, x: float, level: RiskLevel) -> float:
    """ES update kernel ``chi - (xi + (x - xi)^+ / (1 - alpha))``."""
    return chi - (xi + max(x - xi, 0.0) * level.tail_weight)


def empirical_v(xi: float, samples: Sequence[float], level: RiskLevel) -> float:
    """Monte Carlo plug-in of the objective ``V(xi)`` over ``samples``."""
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empirical_v needs at least one sample")
    return xi + np.mean(np.maximum(x - xi, 0.0)) * level.tail_weight


def std_normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


# Acklam's rational approximation of the normal quantile (relative error
# about 1.15e-9), refined below by one Halley step on the erfc-based cdf.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > 1.0 - _P_LOW:
        return -_acklam(1.0 - p)
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def std_normal_inv_cdf(p: float) -> float:
    """Standard normal quantile, accurate to roughly machine precision.

    Raises
    ------
    ValueError
        If ``p`` is not strictly inside (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p!r}")
    x = _acklam(p)
    # Work on the smaller tail so the residual does not cancel catastrophically.
    if p < 0.5:
        e = std_normal_cdf(x) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / _SQRT2)
    u = e / std_normal_pdf(x)
    return x - u / (1.0 + 0.5 * x * u)
