"""Closed-form accuracy-driven parametrisation of the nested and multilevel schemes."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

from mlsa_risk.samplers import BiasParam, LevelLadder

__all__ = [
    "ScenarioKind",
    "Scenario",
    "Allocation",
    "nsa_tuning",
    "level_count",
    "eps_of_h",
    "var_allocation",
    "es_allocation",
]


def _ceil(x: float) -> int:
    # Guard against 1/eps style round-off pushing an exact integer up by one.
    return math.ceil(x * (1.0 - 1e-12))


class ScenarioKind(str, Enum):
    FINITE_MOMENT = "finite_moment"
    GAUSSIAN_CONCENTRATION = "gaussian"
    LIPSCHITZ_CONDITIONAL_CDF = "lipschitz"


@dataclass(frozen=True)
class Scenario:
    """Integrability regime fixing the indicator strong-error rate ``eps(h)``."""

    kind: ScenarioKind
    p_star: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ScenarioKind(self.kind))
        if self.kind is ScenarioKind.FINITE_MOMENT:
            if self.p_star is None or not self.p_star > 1:
                raise ValueError("finite-moment scenario needs p_star > 1")

    @classmethod
    def finite_moment(cls, p_star: float) -> "Scenario":
        return cls(ScenarioKind.FINITE_MOMENT, float(p_star))

    @classmethod
    def gaussian(cls) -> "Scenario":
        return cls(ScenarioKind.GAUSSIAN_CONCENTRATION)

    @classmethod
    def lipschitz(cls) -> "Scenario":
        return cls(ScenarioKind.LIPSCHITZ_CONDITIONAL_CDF)


def eps_of_h(h: float, s: Scenario) -> float:
    """Rate ``eps(h)`` of ``E|1{X_h > xi} - 1{X_h' > xi}|`` under scenario ``s``.

    Under Gaussian concentration ``eps(1) = 0`` since ``|ln 1| = 0``.
    """
    if not 0.0 < h <= 1.0:
        raise ValueError(f"h must lie in (0, 1], got {h!r}")
    if s.kind is ScenarioKind.FINITE_MOMENT:
        return h ** (s.p_star / (2.0 * (1.0 + s.p_star)))
    if s.kind is ScenarioKind.GAUSSIAN_CONCENTRATION:
        return math.sqrt(h) * math.sqrt(abs(math.log(h)))
    return math.sqrt(h)


def nsa_tuning(epsilon: float, beta: float = 1.0) -> tuple[BiasParam, int]:
    """Inner count ``K = ceil(1/eps)`` and iterations ``n = ceil(eps^(-2/beta))``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta!r}")
    return BiasParam(_ceil(1.0 / epsilon)), _ceil(epsilon ** (-2.0 / beta))


def level_count(h0: BiasParam | float, m: int, epsilon: float) -> int:
    """Smallest ``L`` with ``h0 / m**L <= epsilon``."""
    h = h0.h if isinstance(h0, BiasParam) else float(h0)
    if not h > epsilon:
        raise ValueError(f"h0 = {h} must exceed epsilon = {epsilon}: raise h0 or use nested SA")
    return _ceil(math.log(h / epsilon) / math.log(m))


@dataclass(frozen=True)
class Allocation:
    """Per-level iteration budgets on a bias ladder."""

    ladder: LevelLadder
    budgets: tuple[int, ...]
    calibration: float = 1.0

    @property
    def cost(self) -> float:
        """Inner-draw cost ``sum_l N_l / h_l``."""
        return float(sum(n * self.ladder.k(ell) for ell, n in enumerate(self.budgets)))

    def rows(self):
        """``(level, h_l, N_l, cost share)`` tuples."""
        total = self.cost
        return [(ell, self.ladder.h(ell), n, n * self.ladder.k(ell) / total)
                for ell, n in enumerate(self.budgets)]


def _finalise(ladder: LevelLadder, raw: list[float], calibration: float) -> Allocation:
    budgets = [_ceil(x) for x in raw]
    if min(budgets) < 1:
        warnings.warn("some level budgets rounded to zero; clamped to one iteration",
                      RuntimeWarning, stacklevel=3)
        budgets = [max(1, b) for b in budgets]
    if any(a < b for a, b in zip(budgets, budgets[1:])):
        warnings.warn("level budgets are not non-increasing", RuntimeWarning, stacklevel=3)
    return Allocation(ladder, tuple(budgets), calibration)


def var_allocation(epsilon: float, beta: float, ladder: LevelLadder, s: Scenario,
                   gamma1: float, calibration: float = 1.0) -> Allocation:
    """VaR-focused budgets minimising cost under the leading VaR error term."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta!r}")
    hs = [ladder.h(ell) for ell in ladder.levels]
    es = [eps_of_h(h, s) for h in hs]
    p = 1.0 / (1.0 + beta)
    total = sum(h ** (-beta * p) * e ** p for h, e in zip(hs, es))
    front = (calibration * gamma1) ** (1.0 / beta) * epsilon ** (-2.0 / beta) * total ** (1.0 / beta)
    return _finalise(ladder, [front * h ** p * e ** p for h, e in zip(hs, es)], calibration)


def es_allocation(epsilon: float, ladder: LevelLadder, calibration: float = 1.0) -> Allocation:
    """ES-focused budgets ``N_l = ceil(K eps^-2 L h_l)`` (step exponent must be 1).

    ``L`` is taken from ``ladder.l_max``.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon!r}")
    big_l = ladder.l_max
    raw = [calibration * epsilon ** -2 * big_l * ladder.h(ell) for ell in ladder.levels]
    return _finalise(ladder, raw, calibration)
