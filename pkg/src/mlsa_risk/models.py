"""Loss models with a nested structure ``X0 = E[phi(Y, Z) | Y]``.

Two analytically solvable case studies are provided:

* :class:`OptionModel` -- a short position on an option paying ``-W_1^2``,
  whose loss over the horizon ``delta`` is ``delta * (Y^2 - 1)``;
* :class:`SwapModel` -- a short position on a par swap written on a
  Black-Scholes rate, revalued after a short horizon.

Every model draws all randomness from a caller-supplied
:class:`numpy.random.Generator`.  The ``fill_*`` methods are the hot paths:
they write a batch of loss samples into a preallocated buffer using jitted
kernels, and consume the generator exactly as the scalar ``draw_*`` methods
would (outer factor first, then the inner factors one draw at a time).
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from mlsa_risk._numerics import KAHAN_THRESHOLD, pair_means
from mlsa_risk.measures import (
    EstimatePair,
    RiskLevel,
    std_normal_cdf,
    std_normal_inv_cdf,
    std_normal_pdf,
)

__all__ = [
    "LossModel",
    "OptionParams",
    "OptionModel",
    "SwapParams",
    "SwapModel",
    "option_phi",
    "option_exact_loss",
    "option_truth",
    "swap_par_strike",
    "swap_annuity",
    "swap_nominal",
    "swap_phi",
    "swap_exact_loss",
    "swap_truth",
]


class LossModel(ABC):
    """Generator of the factors ``(Y, Z)`` and of the payoff ``phi(Y, Z)``.

    Subclasses must draw inner factors independently of the outer factor.
    The nested loss is ``nested_loss(mean of phi(Y, Z_k))``; the map is the
    identity unless the model's loss is an affine transform of the inner
    conditional expectation.
    """

    level: RiskLevel

    @abstractmethod
    def draw_outer(self, rng: np.random.Generator, size=None):
        """Draw the outer risk factor ``Y``."""

    @abstractmethod
    def draw_inner(self, rng: np.random.Generator, size=None):
        """Draw the inner risk factor ``Z``, independent of ``Y``."""

    @abstractmethod
    def phi(self, outer, inner):
        """Payoff map, vectorised over leading axes."""

    def nested_loss(self, mean_payoff):
        return mean_payoff

    @abstractmethod
    def fill_nested(self, rng: np.random.Generator, out: np.ndarray, k: int) -> None:
        """Write ``len(out)`` iid samples of the ``k``-inner-draw loss into ``out``."""

    @abstractmethod
    def fill_coupled(self, rng: np.random.Generator, coarse: np.ndarray,
                     fine: np.ndarray, k_coarse: int, m: int) -> None:
        """Write coupled (coarse, fine) samples sharing outer and inner draws.

        The coarse loss uses the first ``k_coarse`` inner draws, the fine
        loss all ``k_coarse * m`` of them.
        """

    @property
    def has_exact_loss(self) -> bool:
        return False

    def draw_exact_loss(self, rng: np.random.Generator, size=None):
        raise NotImplementedError(f"{type(self).__name__} has no direct loss simulator")

    def fill_exact(self, rng: np.random.Generator, out: np.ndarray) -> None:
        out[:] = self.draw_exact_loss(rng, out.shape[0])

    def analytic_truth(self) -> EstimatePair:
        raise NotImplementedError(f"{type(self).__name__} has no closed-form VaR/ES")


# --------------------------------------------------------------------------
# Option model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class OptionParams:
    delta: float = 0.5
    level: RiskLevel = field(default_factory=lambda: RiskLevel(0.975))

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta!r}")


def option_phi(y, z, p: OptionParams):
    u = math.sqrt(p.delta) * np.asarray(y) + math.sqrt(1.0 - p.delta) * np.asarray(z)
    return -(u * u)


def option_exact_loss(y, p: OptionParams):
    y = np.asarray(y)
    return p.delta * (y * y - 1.0)


def option_truth(p: OptionParams) -> EstimatePair:
    alpha = p.level.alpha
    q = std_normal_inv_cdf((1.0 - alpha) / 2.0)
    xi = p.delta * (q * q - 1.0)
    mu = math.sqrt(1.0 + xi / p.delta)
    chi = (2.0 * p.delta / (1.0 - alpha)) * (
        mu * std_normal_pdf(mu) + std_normal_cdf(-mu) - (1.0 - alpha) / 2.0)
    return EstimatePair(xi, chi)


@njit(cache=True)
def _option_inner_sum(rng, a, b, count, compensated):
    s = 0.0
    if compensated:
        c = 0.0
        for _ in range(count):
            u = a + b * rng.standard_normal()
            v = -(u * u) - c
            t = s + v
            c = (t - s) - v
            s = t
    else:
        for _ in range(count):
            u = a + b * rng.standard_normal()
            s -= u * u
    return s


@njit(cache=True)
def _option_fill_nested(rng, out, k, sd, sc):
    comp = k > KAHAN_THRESHOLD
    for i in range(out.shape[0]):
        a = sd * rng.standard_normal()
        out[i] = -1.0 - _option_inner_sum(rng, a, sc, k, comp) / k


@njit(cache=True)
def _option_fill_coupled(rng, coarse, fine, k_coarse, m, sd, sc):
    comp = k_coarse * m > KAHAN_THRESHOLD
    k_rest = k_coarse * (m - 1)
    for i in range(coarse.shape[0]):
        a = sd * rng.standard_normal()
        cs = _option_inner_sum(rng, a, sc, k_coarse, comp)
        rs = _option_inner_sum(rng, a, sc, k_rest, comp)
        cm, fm = pair_means(cs, rs, k_coarse, m)
        coarse[i] = -1.0 - cm
        fine[i] = -1.0 - fm


@njit(cache=True)
def _option_exact_inplace(out, delta):
    # ``out`` holds standard normals on entry.  Exact fills take their normals
    # from numpy: one draw per sample is too little work to amortise the cost
    # of handing a Generator to a jitted function.
    for i in range(out.shape[0]):
        y = out[i]
        out[i] = delta * (y * y - 1.0)


class OptionModel(LossModel):
    """Loss ``X0 = -1 - E[phi(Y, Z) | Y] = delta * (Y^2 - 1)`` with Gaussian factors."""

    def __init__(self, params: OptionParams | None = None):
        self.params = params if params is not None else OptionParams()
        self.level = self.params.level
        self._sd = math.sqrt(self.params.delta)
        self._sc = math.sqrt(1.0 - self.params.delta)

    def __repr__(self):
        return f"OptionModel(delta={self.params.delta}, alpha={self.level.alpha})"

    def draw_outer(self, rng, size=None):
        return rng.standard_normal(size)

    def draw_inner(self, rng, size=None):
        return rng.standard_normal(size)

    def phi(self, outer, inner):
        return option_phi(outer, inner, self.params)

    def nested_loss(self, mean_payoff):
        return -1.0 - mean_payoff

    def fill_nested(self, rng, out, k):
        _option_fill_nested(rng, out, int(k), self._sd, self._sc)

    def fill_coupled(self, rng, coarse, fine, k_coarse, m):
        _option_fill_coupled(rng, coarse, fine, int(k_coarse), int(m), self._sd, self._sc)

    @property
    def has_exact_loss(self):
        return True

    def draw_exact_loss(self, rng, size=None):
        return option_exact_loss(rng.standard_normal(size), self.params)

    def fill_exact(self, rng, out):
        rng.standard_normal(out=out)
        _option_exact_inplace(out, self.params.delta)

    def analytic_truth(self):
        return option_truth(self.params)


# --------------------------------------------------------------------------
# Swap model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SwapParams:
    """Stylised swap on a Black-Scholes rate, times in years (30/360).

    The nominal is set so that each leg is worth ``unit`` at time 0; the
    default ``unit = 1e4`` expresses losses in basis points of the leg value.
    Derived quantities (coupon dates, discount factors, annuity, par strike
    and nominal) are computed once at construction.
    """

    r: float = 0.02
    s0: float = 0.01
    kappa: float = 0.12
    sigma: float = 0.20
    coupon_interval: float = 90.0 / 360.0
    maturity: float = 1.0
    horizon: float = 7.0 / 360.0
    level: RiskLevel = field(default_factory=lambda: RiskLevel(0.85))
    unit: float = 1e4

    coupon_dates: np.ndarray = field(init=False, repr=False, compare=False)
    discount: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)
    annuity: float = field(init=False, repr=False, compare=False)
    strike: float = field(init=False, repr=False, compare=False)
    nominal: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.s0 <= 0 or self.sigma <= 0 or self.unit <= 0:
            raise ValueError("s0, sigma and unit must be positive")
        if self.coupon_interval <= 0 or self.maturity <= 0 or self.horizon <= 0:
            raise ValueError("coupon_interval, maturity and horizon must be positive")
        if self.horizon >= self.coupon_interval:
            raise ValueError("horizon must fall before the first coupon date")
        ratio = self.maturity / self.coupon_interval
        d = int(round(ratio))
        if abs(ratio - d) > 1e-9:
            raise ValueError("maturity must be an integer multiple of coupon_interval")
        if d < 2:
            raise ValueError("the swap needs at least two coupon periods (annuity is empty)")
        dates = self.coupon_interval * np.arange(1, d + 1)
        discount = np.exp(-self.r * dates)
        previous = np.concatenate(([0.0], dates[:-1]))
        # w_i = rho_{T_i} Delta_i e^{kappa T_{i-1}}, i = 1..d
        weights = discount * self.coupon_interval * np.exp(self.kappa * previous)
        float_leg = weights.sum()
        fixed_leg = (discount * self.coupon_interval).sum()
        setattr_ = object.__setattr__
        setattr_(self, "coupon_dates", dates)
        setattr_(self, "discount", discount)
        setattr_(self, "weights", weights)
        setattr_(self, "annuity", float(weights[1:].sum()))
        setattr_(self, "strike", float(self.s0 * float_leg / fixed_leg))
        setattr_(self, "nominal", float(self.unit / (self.s0 * float_leg)))

    @property
    def n_coupons(self) -> int:
        return len(self.coupon_dates)

    @property
    def inner_variances(self) -> np.ndarray:
        """Log-variance scale of each inner ratio: ``T_1 - delta`` then ``Delta_i``."""
        tau = np.full(self.n_coupons - 1, self.coupon_interval)
        tau[0] = self.coupon_dates[0] - self.horizon
        return tau

    def mark_to_market(self, t: float, s_hat_t: float, s_hat_fixing: float) -> float:
        """Swap value at ``t`` given the martingale rate now and at the last fixing.

        ``s_hat_fixing`` is the discounted-drift rate at the coupon date
        preceding ``t``; it only matters for the coupon already fixed.
        """
        dates = self.coupon_dates
        i_t = int(np.searchsorted(dates, t, side="right"))  # 0-based index of T_{i_t}
        if i_t >= len(dates):
            return 0.0
        rho_t = math.exp(-self.r * t)
        previous = dates[i_t - 1] if i_t > 0 else 0.0
        value = (self.discount[i_t] / rho_t * self.coupon_interval
                 * (math.exp(self.kappa * previous) * s_hat_fixing - self.strike))
        for i in range(i_t + 1, len(dates)):
            value += (self.discount[i] / rho_t * self.coupon_interval
                      * (math.exp(self.kappa * dates[i - 1]) * s_hat_t - self.strike))
        return self.nominal * value


def swap_par_strike(p: SwapParams) -> float:
    return p.strike


def swap_annuity(p: SwapParams) -> float:
    return p.annuity


def swap_nominal(p: SwapParams) -> float:
    return p.nominal


def swap_phi(y, z, p: SwapParams):
    """Payoff ``N S0 sum_{i>=2} w_i (y prod_{j<i} z_j - 1)``.

    ``z`` carries the ``d - 1`` inner lognormal ratios on its last axis.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != p.n_coupons - 1:
        raise ValueError(f"inner factor must have length {p.n_coupons - 1}, got {z.shape[-1]}")
    y = np.asarray(y, dtype=float)[..., None]
    paths = y * np.cumprod(z, axis=-1)
    return p.nominal * p.s0 * np.sum(p.weights[1:] * (paths - 1.0), axis=-1)


def swap_exact_loss(u, p: SwapParams):
    """Discounted value of the short swap position at the horizon, from a N(0,1) draw."""
    s = p.sigma * math.sqrt(p.horizon)
    return p.nominal * p.annuity * p.s0 * (np.exp(-0.5 * s * s + s * np.asarray(u)) - 1.0)


def swap_truth(p: SwapParams) -> EstimatePair:
    alpha = p.level.alpha
    s = p.sigma * math.sqrt(p.horizon)
    scale = p.nominal * p.annuity * p.s0
    xi = scale * (math.exp(std_normal_inv_cdf(alpha) * s - 0.5 * s * s) - 1.0)
    omega = p.s0 + xi / (p.nominal * p.annuity)
    eta_minus = (math.log(omega / p.s0) - 0.5 * s * s) / s
    chi = scale * (alpha - std_normal_cdf(eta_minus)) / (1.0 - alpha)
    return EstimatePair(xi, chi)


@njit(cache=True)
def _swap_exact_inplace(out, drift, vol, scale):
    for i in range(out.shape[0]):
        out[i] = scale * (math.exp(drift + vol * out[i]) - 1.0)


@njit(cache=True)
def _swap_inner_sum(rng, y, count, drift, vol, weights, scale, compensated):
    n = drift.shape[0]
    s = 0.0
    c = 0.0
    for _ in range(count):
        prod = y
        acc = 0.0
        for j in range(n):
            prod *= math.exp(drift[j] + vol[j] * rng.standard_normal())
            acc += weights[j] * (prod - 1.0)
        payoff = scale * acc
        if compensated:
            v = payoff - c
            t = s + v
            c = (t - s) - v
            s = t
        else:
            s += payoff
    return s


@njit(cache=True)
def _swap_fill_nested(rng, out, k, y_drift, y_vol, drift, vol, weights, scale):
    comp = k > KAHAN_THRESHOLD
    for i in range(out.shape[0]):
        y = math.exp(y_drift + y_vol * rng.standard_normal())
        out[i] = _swap_inner_sum(rng, y, k, drift, vol, weights, scale, comp) / k


@njit(cache=True)
def _swap_fill_coupled(rng, coarse, fine, k_coarse, m, y_drift, y_vol, drift, vol,
                       weights, scale):
    comp = k_coarse * m > KAHAN_THRESHOLD
    k_rest = k_coarse * (m - 1)
    for i in range(coarse.shape[0]):
        y = math.exp(y_drift + y_vol * rng.standard_normal())
        cs = _swap_inner_sum(rng, y, k_coarse, drift, vol, weights, scale, comp)
        rs = _swap_inner_sum(rng, y, k_rest, drift, vol, weights, scale, comp)
        coarse[i], fine[i] = pair_means(cs, rs, k_coarse, m)


class SwapModel(LossModel):
    """Short par swap revalued at the horizon; inner factors are lognormal ratios."""

    def __init__(self, params: SwapParams | None = None):
        self.params = p = params if params is not None else SwapParams()
        self.level = p.level
        tau = p.inner_variances
        self._y_vol = p.sigma * math.sqrt(p.horizon)
        self._y_drift = -0.5 * self._y_vol ** 2
        self._vol = p.sigma * np.sqrt(tau)
        self._drift = -0.5 * self._vol ** 2
        self._weights = np.ascontiguousarray(p.weights[1:])
        self._scale = p.nominal * p.s0

    def __repr__(self):
        return f"SwapModel({self.params!r})"

    def draw_outer(self, rng, size=None):
        return np.exp(self._y_drift + self._y_vol * rng.standard_normal(size))

    def draw_inner(self, rng, size=None):
        shape = (len(self._vol),) if size is None else tuple(np.atleast_1d(size)) + (len(self._vol),)
        return np.exp(self._drift + self._vol * rng.standard_normal(shape))

    def phi(self, outer, inner):
        return swap_phi(outer, inner, self.params)

    def _kernel_args(self):
        return (self._y_drift, self._y_vol, self._drift, self._vol, self._weights, self._scale)

    def fill_nested(self, rng, out, k):
        _swap_fill_nested(rng, out, int(k), *self._kernel_args())

    def fill_coupled(self, rng, coarse, fine, k_coarse, m):
        _swap_fill_coupled(rng, coarse, fine, int(k_coarse), int(m), *self._kernel_args())

    @property
    def has_exact_loss(self):
        return True

    def draw_exact_loss(self, rng, size=None):
        return swap_exact_loss(rng.standard_normal(size), self.params)

    def fill_exact(self, rng, out):
        p = self.params
        rng.standard_normal(out=out)
        _swap_exact_inplace(out, self._y_drift, self._y_vol, p.nominal * p.annuity * p.s0)

    def analytic_truth(self):
        return swap_truth(self.params)
