import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlsa_risk.engine import (
    DivergenceError,
    StepSchedule,
    run_mlsa,
    run_mlsa_level,
    run_nested_sa,
    run_sa,
)
from mlsa_risk.measures import EstimatePair, RiskLevel
from mlsa_risk.models import LossModel, OptionModel, SwapModel
from mlsa_risk.samplers import BiasParam, LevelLadder, stream

LEVEL = RiskLevel(0.975)


def reference_sa(xs, sched, level, init):
    """Plain-Python transcription of the two-time-scale recursion."""
    xi, chi = init
    tw = level.tail_weight
    path = []
    for i, x in enumerate(xs):
        n1 = i + 1
        gamma = sched.gamma1 / (sched.offset + n1 ** sched.beta)
        target = xi + tw * max(x - xi, 0.0)
        h1 = 1.0 - tw * (x >= xi)
        chi = chi - (chi - target) / n1
        xi = xi - gamma * h1
        path.append(xi)
    return xi, chi, np.array(path)


def array_fill(values):
    """A ``fill(rng, out)`` replaying a fixed loss sequence chunk by chunk."""
    pos = [0]

    def fill(rng, out):
        out[:] = values[pos[0]:pos[0] + out.shape[0]]
        pos[0] += out.shape[0]

    return fill


# -- schedule -----------------------------------------------------------------

def test_schedule_values():
    s = StepSchedule(2.0, 1.0, 3.0)
    assert s(1) == 0.5
    assert StepSchedule(1.0, 0.5)(4) == 0.5


@pytest.mark.parametrize("kw", [dict(gamma1=0.0), dict(gamma1=1.0, beta=0.0),
                                dict(gamma1=1.0, beta=1.5), dict(gamma1=1.0, offset=-1.0)])
def test_schedule_validation(kw):
    with pytest.raises(ValueError):
        StepSchedule(**kw)


# -- recursion ----------------------------------------------------------------

@pytest.mark.parametrize("x,init", [(3.0, (1.0, 7.0)), (0.5, (1.0, -2.0)), (1.0, (1.0, 0.0))])
def test_single_step(x, init):
    sched = StepSchedule(2.0, 1.0, 3.0)
    res = run_sa(array_fill(np.array([x])), 1, sched, LEVEL, stream(0), init)
    xi0 = init[0]
    tw = LEVEL.tail_weight
    # The ES step has weight 1 at n = 1, so chi_0 drops out.
    assert res.estimate.chi == pytest.approx(xi0 + tw * max(x - xi0, 0.0), rel=1e-15)
    h1 = 1.0 - tw if x >= xi0 else 1.0
    assert res.estimate.xi == pytest.approx(xi0 - 0.5 * h1, rel=1e-15)


@given(seed=st.integers(0, 2**31), beta=st.sampled_from([1.0, 0.75]),
       offset=st.sampled_from([0.0, 10.0]))
def test_recursion_matches_reference(seed, beta, offset):
    xs = np.random.default_rng(seed).standard_normal(300) * 2.0
    sched = StepSchedule(0.3, beta, offset)
    res = run_sa(array_fill(xs), xs.size, sched, LEVEL, stream(0), (0.1, 0.0),
                 record_path=True)
    xi, chi, path = reference_sa(xs, sched, LEVEL, (0.1, 0.0))
    assert res.estimate.xi == pytest.approx(xi, rel=1e-12, abs=1e-12)
    assert res.estimate.chi == pytest.approx(chi, rel=1e-12, abs=1e-12)
    np.testing.assert_allclose(res.path, path, rtol=1e-12, atol=1e-12)


def test_update_is_bounded_by_step_times_k_alpha():
    sched = StepSchedule(1.0, 1.0, 5.0)
    res = run_sa(OptionModel(), 20_000, sched, LEVEL, stream(4), record_path=True)
    path = np.concatenate(([0.0], res.path))
    steps = np.abs(np.diff(path))
    bound = sched(np.arange(1, 20_001)) * LEVEL.k_alpha
    assert np.all(steps <= bound * (1 + 1e-12))


def test_es_iterate_is_running_mean():
    # From chi_0 = 0 the ES iterate is the running mean of xi_k + (X - xi_k)^+ / (1 - alpha).
    n = 50_000
    xs = OptionModel().draw_exact_loss(stream(6), n)
    sched = StepSchedule(1.0, 1.0, 100.0)
    res = run_sa(array_fill(xs), n, sched, LEVEL, stream(0), (0.5, 0.0), record_path=True)
    prev = np.concatenate(([0.5], res.path[:-1]))
    targets = prev + np.maximum(xs - prev, 0.0) * LEVEL.tail_weight
    assert abs(res.estimate.chi - targets.mean()) <= 1e-10


def test_chunking_is_invisible():
    # Long runs are processed in chunks; the outcome must equal one long pass.
    n = 40_000
    xs = np.random.default_rng(1).standard_normal(n)
    sched = StepSchedule(1.0)
    res = run_sa(array_fill(xs), n, sched, LEVEL, stream(0))
    xi, chi, _ = reference_sa(xs, sched, LEVEL, (0.0, 0.0))
    assert res.estimate.xi == pytest.approx(xi, rel=1e-12)
    assert res.estimate.chi == pytest.approx(chi, rel=1e-12)


@pytest.mark.parametrize("bad", [1e12, float("nan"), float("inf")])
def test_divergence_is_reported(bad):
    xs = np.full(10, bad)
    with pytest.raises(DivergenceError) as exc:
        run_sa(array_fill(xs), 10, StepSchedule(1.0), LEVEL, stream(0))
    assert exc.value.iteration == 1


def test_invalid_arguments():
    with pytest.raises(ValueError):
        run_sa(OptionModel(), 0, StepSchedule(1.0), LEVEL, stream(0))
    with pytest.raises(ValueError):
        run_sa(OptionModel(), 5, StepSchedule(1.0), LEVEL, stream(0), (float("nan"), 0.0))


def test_sa_is_deterministic():
    a = run_sa(OptionModel(), 1000, StepSchedule(1.0), LEVEL, stream(3, 1))
    b = run_sa(OptionModel(), 1000, StepSchedule(1.0), LEVEL, stream(3, 1))
    assert a.estimate == b.estimate


def test_option_sa_is_centred_on_the_truth():
    model = OptionModel()
    sched = StepSchedule(1.0, 1.0, 100.0)
    est = [run_sa(model, 1_000_000, sched, LEVEL, stream(99, r)).estimate.xi
           for r in range(200)]
    assert abs(np.mean(est) - 2.012) <= 0.02


# -- nested SA ----------------------------------------------------------------

def test_nested_with_one_inner_draw_equals_sa_on_numpy_samples():
    # With K = 1 the nested sampler reads (Y, Z) pairs in order; the same
    # losses built with numpy must drive the recursion to the same point.
    model = OptionModel()
    n = 30_000

    def fill(g, out):
        v = g.standard_normal(2 * out.shape[0]).reshape(-1, 2)
        out[:] = model.nested_loss(model.phi(v[:, 0], v[:, 1]))

    sched = StepSchedule(1.0, 1.0, 100.0)
    a = run_nested_sa(model, BiasParam(1), n, sched, LEVEL, stream(5))
    b = run_sa(fill, n, sched, LEVEL, stream(5))
    assert a.estimate.xi == pytest.approx(b.estimate.xi, rel=1e-12)
    assert a.estimate.chi == pytest.approx(b.estimate.chi, rel=1e-12)
    assert a.inner_draws == n


def test_nested_draw_accounting():
    res = run_nested_sa(SwapModel(), BiasParam(7), 100, StepSchedule(50.0),
                        SwapModel().level, stream(0))
    assert res.inner_draws == 700 and res.iterations == 100


# -- multilevel SA ------------------------------------------------------------

def test_mlsa_single_level_equals_nested_sa():
    model = OptionModel()
    sched = StepSchedule(1.0, 1.0, 100.0)
    lad = LevelLadder(BiasParam(8), 2, 0)
    a = run_mlsa(model, lad, [5000], sched, LEVEL, 31)
    b = run_nested_sa(model, BiasParam(8), 5000, sched, LEVEL, stream(31, 0))
    assert a.estimate == b.estimate


def test_mlsa_levels_are_order_independent():
    model = OptionModel()
    sched = StepSchedule(1.0, 1.0, 100.0)
    lad = LevelLadder(BiasParam(4), 2, 3)
    budgets = [4000, 2000, 1000, 500]
    ref = run_mlsa(model, lad, budgets, sched, LEVEL, 12)
    by_level = {ell: run_mlsa_level(model, lad, ell, budgets[ell], sched, LEVEL,
                                    stream(12, ell))
                for ell in reversed(lad.levels)}
    assert tuple(by_level[ell] for ell in lad.levels) == ref.levels
    xi = sum(by_level[ell].correction.xi for ell in lad.levels)
    chi = sum(by_level[ell].correction.chi for ell in lad.levels)
    assert EstimatePair(xi, chi) == ref.estimate
    assert ref.inner_draws == 4000 * 4 + 2000 * 8 + 1000 * 16 + 500 * 32


class _IdenticalPairs(LossModel):
    """Coupled samples whose coarse and fine members coincide."""

    level = LEVEL

    def draw_outer(self, rng, size=None):
        return rng.standard_normal(size)

    def draw_inner(self, rng, size=None):
        return rng.standard_normal(size)

    def phi(self, outer, inner):
        return outer + 0.0 * inner

    def fill_nested(self, rng, out, k):
        out[:] = rng.standard_normal(out.shape[0])

    def fill_coupled(self, rng, coarse, fine, k_coarse, m):
        coarse[:] = rng.standard_normal(coarse.shape[0])
        fine[:] = coarse


def test_identical_pairs_give_zero_corrections():
    model = _IdenticalPairs()
    lad = LevelLadder(BiasParam(2), 2, 3)
    res = run_mlsa(model, lad, [3000, 300, 30, 3], StepSchedule(1.0), LEVEL, 8)
    for lv in res.levels[1:]:
        assert lv.correction == EstimatePair(0.0, 0.0)
    assert res.estimate == res.levels[0].fine


def test_mlsa_level_inits():
    model = OptionModel()
    lad = LevelLadder(BiasParam(4), 2, 1)
    sched = StepSchedule(1.0)
    res = run_mlsa(model, lad, [1, 1], sched, LEVEL, 0,
                   level_inits=[(1.0, 0.0), ((2.0, 0.0), (3.0, 0.0))])
    lv1 = res.levels[1]
    assert lv1.coarse.xi in (2.0 - 1.0, 2.0 - (1.0 - LEVEL.tail_weight))
    assert lv1.fine.xi in (3.0 - 1.0, 3.0 - (1.0 - LEVEL.tail_weight))


def test_mlsa_budget_validation():
    lad = LevelLadder(BiasParam(4), 2, 2)
    with pytest.raises(ValueError):
        run_mlsa(OptionModel(), lad, [10, 10], StepSchedule(1.0), LEVEL, 0)
    with pytest.raises(ValueError):
        run_mlsa(OptionModel(), lad, [10, 0, 10], StepSchedule(1.0), LEVEL, 0)
    with pytest.raises(ValueError):
        run_mlsa_level(OptionModel(), lad, 3, 10, StepSchedule(1.0), LEVEL, stream(0))
