"""Two-time-scale stochastic approximation of the (VaR, ES) couple.

Three drivers share one recursion kernel:

* :func:`run_sa` -- classical scheme on exact loss samples;
* :func:`run_nested_sa` -- the same recursion on nested inner-Monte-Carlo
  samples with a fixed inner count ``K``;
* :func:`run_mlsa` -- multilevel telescoping of paired nested chains over a
  geometric ladder of inner counts.

The VaR iterate moves with step ``gamma_n``; the ES iterate uses ``1 / n``,
which makes it the running mean of ``xi_k + (X_{k+1} - xi_k)^+ / (1 - alpha)``
when started from zero.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from numba import njit

from mlsa_risk.measures import EstimatePair, RiskLevel
from mlsa_risk.models import LossModel
from mlsa_risk.samplers import BiasParam, LevelLadder, stream

__all__ = [
    "StepSchedule",
    "SARunResult",
    "LevelResult",
    "DivergenceError",
    "run_sa",
    "run_nested_sa",
    "run_mlsa_level",
    "run_mlsa",
    "DIVERGENCE_BOUND",
]

DIVERGENCE_BOUND = 1e9
_CHUNK_DRAWS = 1 << 20  # inner draws generated per kernel call
_MAX_CHUNK = 1 << 14

FillFn = Callable[[np.random.Generator, np.ndarray], None]


class DivergenceError(RuntimeError):
    """A VaR or ES iterate left the finite range (or the divergence bound)."""

    def __init__(self, iteration: int, chain: str = ""):
        self.iteration = iteration
        self.chain = chain
        where = f" in {chain} chain" if chain else ""
        super().__init__(f"iterate diverged{where} at iteration {iteration}")


@dataclass(frozen=True)
class StepSchedule:
    """Learning rate ``gamma_n = gamma1 / (offset + n**beta)``, ``n >= 1``."""

    gamma1: float
    beta: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.gamma1 <= 0:
            raise ValueError("gamma1 must be positive")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    def __call__(self, n):
        return self.gamma1 / (self.offset + np.asarray(n, dtype=float) ** self.beta)


@dataclass
class SARunResult:
    estimate: EstimatePair
    iterations: int
    inner_draws: int
    wall_time: float
    path: np.ndarray | None = field(default=None, repr=False)
    levels: tuple | None = field(default=None, repr=False)


@dataclass(frozen=True)
class LevelResult:
    """Terminal iterates of one MLSA level (coarse is ``None`` at level 0)."""

    level: int
    fine: EstimatePair
    coarse: EstimatePair | None
    iterations: int
    inner_draws: int

    @property
    def correction(self) -> EstimatePair:
        if self.coarse is None:
            return self.fine
        return EstimatePair(self.fine.xi - self.coarse.xi, self.fine.chi - self.coarse.chi)


@njit(cache=True)
def _sa_steps(xs, start, xi, chi, gamma1, beta, offset, tail_weight, bound, path):
    """Advance one chain over the samples ``xs``; ``start`` is the global step index.

    Returns the new iterates and the 1-based index of the first diverged
    step, or -1.  A NaN sample counts as a divergence: it would otherwise
    compare false against ``xi`` and pass silently as a non-exceedance.
    """
    record = path.shape[0] > 0
    for i in range(xs.shape[0]):
        n1 = start + i + 1
        if beta == 1.0:
            gamma = gamma1 / (offset + n1)
        else:
            gamma = gamma1 / (offset + n1 ** beta)
        x = xs[i]
        if x != x:
            return xi, chi, n1
        excess = x - xi
        if excess >= 0.0:
            h1 = 1.0 - tail_weight
            target = xi + tail_weight * excess
        else:
            h1 = 1.0
            target = xi
        chi = chi - (chi - target) / n1
        xi = xi - gamma * h1
        if record:
            path[i] = xi
        if not (abs(xi) <= bound and abs(chi) <= bound):
            return xi, chi, n1
    return xi, chi, -1


_EMPTY = np.empty(0)


class _Chain:
    __slots__ = ("xi", "chi", "name", "path")

    def __init__(self, init: EstimatePair, name: str, n_record: int):
        self.xi = float(init[0])
        self.chi = float(init[1])
        if not (math.isfinite(self.xi) and math.isfinite(self.chi)):
            raise ValueError(f"initial iterate must be finite, got {init!r}")
        self.name = name
        self.path = np.empty(n_record) if n_record else None

    def advance(self, xs, start, sched: StepSchedule, tail_weight):
        path = self.path[start:start + xs.shape[0]] if self.path is not None else _EMPTY
        self.xi, self.chi, bad = _sa_steps(xs, start, self.xi, self.chi, sched.gamma1,
                                           sched.beta, sched.offset, tail_weight,
                                           DIVERGENCE_BOUND, path)
        if bad >= 0:
            raise DivergenceError(int(bad), self.name)

    @property
    def estimate(self) -> EstimatePair:
        return EstimatePair(self.xi, self.chi)


def _chunk_size(draws_per_sample: int) -> int:
    return int(max(1, min(_MAX_CHUNK, _CHUNK_DRAWS // max(1, draws_per_sample))))


def _run_single(fill: FillFn, n: int, sched: StepSchedule, level: RiskLevel,
                rng: np.random.Generator, init, draws_per_sample: int,
                record_path: bool, name: str) -> tuple[_Chain, float]:
    if n < 1:
        raise ValueError("the number of iterations must be >= 1")
    chain = _Chain(init, name, n if record_path else 0)
    t0 = time.perf_counter()
    chunk = min(n, _chunk_size(draws_per_sample))
    buf = np.empty(chunk)
    tw = level.tail_weight
    done = 0
    while done < n:
        c = min(chunk, n - done)
        xs = buf[:c]
        fill(rng, xs)
        chain.advance(xs, done, sched, tw)
        done += c
    return chain, time.perf_counter() - t0


def run_sa(loss: Union[LossModel, FillFn], n: int, sched: StepSchedule, level: RiskLevel,
           rng: np.random.Generator, init: Sequence[float] = (0.0, 0.0),
           record_path: bool = False) -> SARunResult:
    """Classical two-time-scale SA on exactly simulated losses.

    Parameters
    ----------
    loss : LossModel or callable
        A model with a direct loss simulator, or any ``fill(rng, out)``
        writing iid loss samples into ``out``.
    n : int
        Number of iterations.
    sched : StepSchedule
        VaR learning rate.
    level : RiskLevel
    rng : numpy.random.Generator
    init : (xi0, chi0)
    record_path : bool
        Keep the VaR iterates ``xi_1..xi_n`` in ``result.path``.
    """
    fill = loss.fill_exact if isinstance(loss, LossModel) else loss
    chain, wall = _run_single(fill, n, sched, level, rng, init, 1, record_path, "sa")
    return SARunResult(chain.estimate, n, n, wall, chain.path)


def run_nested_sa(model: LossModel, bias: BiasParam, n: int, sched: StepSchedule,
                  level: RiskLevel, rng: np.random.Generator,
                  init: Sequence[float] = (0.0, 0.0), record_path: bool = False) -> SARunResult:
    """Nested SA: the SA recursion fed with ``bias.k``-inner-draw loss samples."""
    k = bias.k

    def fill(g, out):
        model.fill_nested(g, out, k)

    chain, wall = _run_single(fill, n, sched, level, rng, init, k, record_path, "nsa")
    return SARunResult(chain.estimate, n, n * k, wall, chain.path)


def run_mlsa_level(model: LossModel, ladder: LevelLadder, level_index: int, n: int,
                   sched: StepSchedule, level: RiskLevel, rng: np.random.Generator,
                   init: Sequence[float] = (0.0, 0.0),
                   coarse_init: Sequence[float] | None = None) -> LevelResult:
    """Run one level of the multilevel scheme for ``n`` iterations.

    Level 0 is a plain nested chain with ``ladder.k(0)`` inner draws.  A
    level ``l >= 1`` runs a coarse and a fine chain driven by the same
    coupled samples.
    """
    if n < 1:
        raise ValueError("every level needs at least one iteration")
    if level_index == 0:
        res = run_nested_sa(model, ladder.h0, n, sched, level, rng, init)
        return LevelResult(0, res.estimate, None, n, res.inner_draws)
    if not 1 <= level_index <= ladder.l_max:
        raise ValueError(f"level must lie in 0..{ladder.l_max}, got {level_index}")
    k_coarse = ladder.k(level_index - 1)
    m = ladder.m
    fine = _Chain(init, f"level {level_index} fine", 0)
    coarse = _Chain(init if coarse_init is None else coarse_init,
                    f"level {level_index} coarse", 0)
    chunk = min(n, _chunk_size(k_coarse * m))
    cbuf = np.empty(chunk)
    fbuf = np.empty(chunk)
    tw = level.tail_weight
    done = 0
    while done < n:
        c = min(chunk, n - done)
        xc, xf = cbuf[:c], fbuf[:c]
        model.fill_coupled(rng, xc, xf, k_coarse, m)
        coarse.advance(xc, done, sched, tw)
        fine.advance(xf, done, sched, tw)
        done += c
    return LevelResult(level_index, fine.estimate, coarse.estimate, n, n * k_coarse * m)


def run_mlsa(model: LossModel, ladder: LevelLadder, budgets: Sequence[int],
             sched: StepSchedule, level: RiskLevel, seed,
             init: Sequence[float] = (0.0, 0.0),
             level_inits: Sequence | None = None) -> SARunResult:
    """Multilevel SA estimate of the (VaR, ES) couple.

    Parameters
    ----------
    budgets : sequence of int
        Iteration counts ``N_0..N_L``; its length fixes the number of levels
        actually run and must equal ``ladder.l_max + 1``.
    seed : int or numpy.random.SeedSequence
        Level ``l`` draws from ``stream(seed, l)``, so the level-0 chain is
        identical to :func:`run_nested_sa` run on ``stream(seed, 0)``.
    init : (xi0, chi0)
        Initial iterate of every chain.
    level_inits : sequence, optional
        Per-level override: entry 0 is a single ``(xi0, chi0)``, entries
        ``l >= 1`` are ``(coarse_init, fine_init)`` pairs.
    """
    budgets = [int(b) for b in budgets]
    if len(budgets) != ladder.l_max + 1:
        raise ValueError(f"expected {ladder.l_max + 1} budgets, got {len(budgets)}")
    if min(budgets) < 1:
        raise ValueError("every level needs at least one iteration")
    streams = [stream(seed, ell) for ell in range(len(budgets))]
    t0 = time.perf_counter()
    results = []
    for ell, n in enumerate(budgets):
        if level_inits is not None:
            if ell == 0:
                lv_init, lv_coarse = level_inits[0], None
            else:
                lv_coarse, lv_init = level_inits[ell]
        else:
            lv_init, lv_coarse = init, None
        results.append(run_mlsa_level(model, ladder, ell, n, sched, level,
                                      streams[ell], lv_init, lv_coarse))
    wall = time.perf_counter() - t0
    xi = sum(r.correction.xi for r in results)
    chi = sum(r.correction.chi for r in results)
    return SARunResult(EstimatePair(xi, chi), sum(budgets),
                       sum(r.inner_draws for r in results), wall, levels=tuple(results))
