"""Replication runner, error/runtime aggregation and slope fitting.

A *cell* is one ``(algorithm, target, epsilon)`` triple.  Every cell is run
``R`` times; replication ``r`` draws from streams keyed by ``(seed, r)`` so the
results do not depend on the order replications are executed in.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from mlsa_risk.engine import (
    DivergenceError,
    SARunResult,
    StepSchedule,
    run_mlsa,
    run_nested_sa,
    run_sa,
)
from mlsa_risk.measures import EstimatePair
from mlsa_risk.models import LossModel
from mlsa_risk.samplers import BiasParam, LevelLadder, stream
from mlsa_risk.tuning import Allocation, es_allocation, level_count, nsa_tuning, var_allocation

__all__ = [
    "ALGORITHMS",
    "TARGETS",
    "CSV_COLUMNS",
    "SlopeFit",
    "CellPlan",
    "BenchRecord",
    "BiasRow",
    "rmse",
    "fit_loglog_slope",
    "plan_cell",
    "run_once",
    "run_replications",
    "bench_cell",
    "bias_study",
    "records_to_csv",
    "slope_table",
    "matched_runtime",
    "warm_up",
]

ALGORITHMS = ("sa", "nsa", "mlsa")
TARGETS = ("var", "es")
CSV_COLUMNS = ("algorithm", "target", "epsilon", "rmse", "mean_runtime_s",
               "mean_cost", "replications")


def rmse(estimates: Sequence[float], truth: float) -> float:
    """Root mean squared error ``sqrt(mean((e_i - truth)^2))``."""
    e = np.asarray(estimates, dtype=float)
    if e.size == 0:
        raise ValueError("rmse of an empty estimate sequence")
    return float(np.sqrt(np.mean((e - truth) ** 2)))


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    """Ordinary least squares of ``ln y`` on ``ln x``.

    Examples
    --------
    >>> round(fit_loglog_slope([1, 2, 4], [1, 4, 16]).slope, 12)
    2.0
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d sequences of equal length")
    if x.size < 3:
        raise ValueError("a slope fit needs at least 3 points")
    if not (np.all(x > 0) and np.all(y > 0)):
        raise ValueError("log-log fit needs strictly positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return SlopeFit(float(slope), float(intercept), min(1.0, max(0.0, r2)))


# --------------------------------------------------------------------------
# Cell planning
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CellPlan:
    """Everything needed to run one replication of a cell.

    ``iterations`` is ``n`` for SA/NSA and the budget tuple for MLSA; ``cost``
    is the analytic inner-draw count of one replication.
    """

    algorithm: str
    target: str
    epsilon: float
    sched: StepSchedule
    bias: BiasParam | None = None
    iterations: int | tuple = 0
    allocation: Allocation | None = None

    @property
    def cost(self) -> int:
        if self.algorithm == "sa":
            return int(self.iterations)
        if self.algorithm == "nsa":
            return int(self.iterations) * self.bias.k
        return int(self.allocation.cost)


def plan_cell(algorithm: str, target: str, epsilon: float, sched: StepSchedule, *,
              beta: float = 1.0, h0: BiasParam | None = None, m: int = 2,
              scenario=None, calibration: float = 1.0) -> CellPlan:
    """Tune a cell from its prescribed accuracy.

    SA and NSA use ``n = ceil(eps^(-2/beta))`` (NSA adds ``K = ceil(1/eps)``);
    MLSA picks the level count from ``h0`` and the budgets from the VaR- or
    ES-focused allocation.
    """
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    bias, n = nsa_tuning(epsilon, beta)
    if algorithm == "sa":
        return CellPlan(algorithm, target, epsilon, sched, None, n)
    if algorithm == "nsa":
        return CellPlan(algorithm, target, epsilon, sched, bias, n)
    if h0 is None:
        raise ValueError("MLSA needs an initial bias h0")
    ladder = LevelLadder(h0, m, level_count(h0, m, epsilon))
    if target == "var":
        if scenario is None:
            raise ValueError("VaR allocation needs a scenario")
        alloc = var_allocation(epsilon, beta, ladder, scenario, sched.gamma1, calibration)
    else:
        alloc = es_allocation(epsilon, ladder, calibration)
    return CellPlan(algorithm, target, epsilon, sched, h0, alloc.budgets, alloc)


def run_once(model: LossModel, plan: CellPlan, seed, rep: int, init) -> SARunResult:
    """Replication ``rep`` of a cell, drawing from streams keyed by ``(seed, rep)``."""
    level = model.level
    if plan.algorithm == "sa":
        return run_sa(model, plan.iterations, plan.sched, level, stream(seed, rep), init)
    if plan.algorithm == "nsa":
        return run_nested_sa(model, plan.bias, plan.iterations, plan.sched, level,
                             stream(seed, rep), init)
    ss = np.random.SeedSequence(int(seed), spawn_key=(rep,))
    return run_mlsa(model, plan.allocation.ladder, plan.iterations, plan.sched, level,
                    ss, init)


@dataclass
class ReplicationSet:
    """Outcome of the replications of one cell; ``None`` marks a diverged run."""

    plan: CellPlan
    results: list = field(default_factory=list)

    @property
    def ok(self) -> list[SARunResult]:
        return [r for r in self.results if r is not None]

    @property
    def diverged(self) -> int:
        return sum(r is None for r in self.results)


def run_replications(model: LossModel, plan: CellPlan, reps: int, seed,
                     init: Sequence[float] = (0.0, 0.0),
                     order: Iterable[int] | None = None) -> ReplicationSet:
    """Run ``reps`` independent replications of a cell.

    Replication ``r`` uses streams keyed by ``(seed, r)``; ``order`` only
    changes the execution order, never the outcome.  Diverged runs are kept
    as ``None`` so callers can count them.
    """
    if reps < 1:
        raise ValueError("at least one replication is needed")
    order = range(reps) if order is None else list(order)
    out: dict[int, SARunResult | None] = {}
    for rep in order:
        try:
            out[rep] = run_once(model, plan, seed, rep, init)
        except DivergenceError:
            out[rep] = None
    return ReplicationSet(plan, [out[r] for r in range(reps)])


# --------------------------------------------------------------------------
# Aggregation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRecord:
    """One cell of a comparison.  ``rmse`` refers to the cell's target."""

    algorithm: str
    target: str
    epsilon: float
    rmse: float
    rmse_var: float
    rmse_es: float
    mean_runtime_seconds: float
    mean_inner_draws: float
    replications: int
    diverged: int = 0

    @property
    def missing(self) -> bool:
        return self.replications == 0


def bench_cell(model: LossModel, plan: CellPlan, reps: int, seed,
               init: Sequence[float] = (0.0, 0.0),
               truth: EstimatePair | None = None) -> BenchRecord:
    """Run a cell and aggregate its replications into a :class:`BenchRecord`."""
    truth = model.analytic_truth() if truth is None else truth
    rs = run_replications(model, plan, reps, seed, init)
    ok = rs.ok
    if rs.diverged:
        warnings.warn(f"{rs.diverged}/{reps} replications diverged in cell "
                      f"{plan.algorithm}/{plan.target}/eps={plan.epsilon:g}",
                      RuntimeWarning, stacklevel=2)
    if not ok:
        nan = float("nan")
        return BenchRecord(plan.algorithm, plan.target, plan.epsilon, nan, nan, nan,
                           nan, float(plan.cost), 0, rs.diverged)
    r_var = rmse([r.estimate.xi for r in ok], truth.xi)
    r_es = rmse([r.estimate.chi for r in ok], truth.chi)
    return BenchRecord(
        plan.algorithm, plan.target, plan.epsilon,
        r_var if plan.target == "var" else r_es, r_var, r_es,
        float(np.mean([r.wall_time for r in ok])),
        float(np.mean([r.inner_draws for r in ok])),
        len(ok), rs.diverged,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def records_to_csv(records: Sequence[BenchRecord], timing: bool = True) -> str:
    """Tidy CSV with the fixed column set; runtime is left blank without timing."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rec in records:
        w.writerow([rec.algorithm, rec.target, _fmt(rec.epsilon),
                    "" if rec.missing else _fmt(rec.rmse),
                    _fmt(rec.mean_runtime_seconds) if timing and not rec.missing else "",
                    _fmt(rec.mean_inner_draws), rec.replications])
    return buf.getvalue()


def slope_table(records: Sequence[BenchRecord], timing: bool = True) -> dict:
    """Per ``(algorithm, target)`` slope fits, skipping missing cells.

    Keys of each entry: ``runtime_vs_eps``, ``runtime_vs_rmse``,
    ``rmse_vs_eps`` and ``cost_vs_eps``; a fit is ``None`` when fewer than
    three usable cells remain.
    """
    groups: dict[tuple[str, str], list[BenchRecord]] = {}
    for rec in records:
        groups.setdefault((rec.algorithm, rec.target), []).append(rec)
    table = {}
    for key, recs in groups.items():
        good = [r for r in recs if not r.missing and r.rmse > 0]
        eps = [r.epsilon for r in good]

        def fit(xs, ys):
            return fit_loglog_slope(xs, ys) if len(xs) >= 3 else None

        entry = {"rmse_vs_eps": fit(eps, [r.rmse for r in good]),
                 "cost_vs_eps": fit(eps, [r.mean_inner_draws for r in good])}
        if timing:
            entry["runtime_vs_eps"] = fit(eps, [r.mean_runtime_seconds for r in good])
            entry["runtime_vs_rmse"] = fit([r.rmse for r in good],
                                           [r.mean_runtime_seconds for r in good])
        table[key] = entry
    return table


def matched_runtime(records: Sequence[BenchRecord], algorithm: str, target: str,
                    rmse_level: float) -> tuple[float, bool]:
    """Runtime of ``algorithm`` at a given RMSE, read off its runtime/RMSE curve.

    The curve is interpolated linearly in log-log coordinates between the
    two cells bracketing ``rmse_level``.  Outside the observed range the
    fitted log-log line is used instead and the second return value is
    ``False``.
    """
    good = sorted((r for r in records
                   if r.algorithm == algorithm and r.target == target and not r.missing),
                  key=lambda r: r.rmse)
    if not good:
        raise ValueError(f"no usable cells for {algorithm}/{target}")
    lx = np.log([r.rmse for r in good])
    ly = np.log([r.mean_runtime_seconds for r in good])
    x0 = math.log(rmse_level)
    for i in range(len(good) - 1):
        if lx[i] <= x0 <= lx[i + 1] and lx[i + 1] > lx[i]:
            t = (x0 - lx[i]) / (lx[i + 1] - lx[i])
            return float(math.exp(ly[i] + t * (ly[i + 1] - ly[i]))), True
    if len(good) >= 2:
        fit = np.polyfit(lx, ly, 1)
        return float(math.exp(np.polyval(fit, x0))), False
    return float(math.exp(ly[0])), False


# --------------------------------------------------------------------------
# Bias study
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasRow:
    h: float
    xi_error: float
    chi_error: float
    xi_rescaled: float
    chi_rescaled: float
    replications: int
    diverged: int = 0
    xi_stderr: float = float("nan")
    chi_stderr: float = float("nan")


def _stderr(values: np.ndarray) -> float:
    if values.size < 2:
        return float("nan")
    return float(values.std(ddof=1) / math.sqrt(values.size))


def bias_study(model: LossModel, biases: Sequence[BiasParam], n: int, sched: StepSchedule,
               reps: int, seed, init: Sequence[float] = (0.0, 0.0)) -> list[BiasRow]:
    """Centred and ``h``-rescaled terminal errors of nested SA over a bias grid.

    For each ``h`` the ``reps`` terminal iterates ``(xi_n, chi_n)`` are
    averaged and compared with the model's analytic truth; ``*_stderr`` are
    the standard errors of those averages (NaN with a single replication).
    Replication ``r`` of every ``h`` uses the stream ``(seed, r)``.
    """
    truth = model.analytic_truth()
    rows = []
    for bias in biases:
        plan = CellPlan("nsa", "var", bias.h, sched, bias, int(n))
        rs = run_replications(model, plan, reps, seed, init)
        ok = rs.ok
        if not ok:
            nan = float("nan")
            rows.append(BiasRow(bias.h, nan, nan, nan, nan, 0, rs.diverged))
            continue
        xs = np.array([r.estimate.xi for r in ok])
        cs = np.array([r.estimate.chi for r in ok])
        dx = float(xs.mean()) - truth.xi
        dc = float(cs.mean()) - truth.chi
        rows.append(BiasRow(bias.h, dx, dc, dx / bias.h, dc / bias.h, len(ok), rs.diverged,
                            _stderr(xs), _stderr(cs)))
    return rows


def warm_up(model: LossModel) -> None:
    """Load every jitted kernel once so the first timed run pays no compile cost."""
    sched = StepSchedule(1.0)
    rng = stream(0, 0)
    level = model.level
    if model.has_exact_loss:
        run_sa(model, 4, sched, level, rng)
    run_nested_sa(model, BiasParam(2), 4, sched, level, rng)
    run_mlsa(model, LevelLadder(BiasParam(1), 2, 1), (2, 2), sched, level, 0)
