import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mlsa_risk.models import OptionModel, SwapModel, option_exact_loss
from mlsa_risk.samplers import (
    BiasParam,
    LevelLadder,
    coupled_draw_count,
    coupled_samples,
    nested_draw_count,
    nested_samples,
    pair_from_payoffs,
    sample_coupled_pair,
    sample_nested,
    stream,
)

MODELS = [OptionModel(), SwapModel()]


# -- parameters ---------------------------------------------------------------

@pytest.mark.parametrize("k", [0, -3, 2.5])
def test_bias_param_validation(k):
    with pytest.raises(ValueError):
        BiasParam(k)


def test_bias_param_from_h():
    assert BiasParam.from_h(1 / 32).k == 32
    assert BiasParam(200).h == 1 / 200
    with pytest.raises(ValueError):
        BiasParam.from_h(0.3)


def test_ladder():
    lad = LevelLadder(BiasParam(16), 2, 3)
    assert list(lad.levels) == [0, 1, 2, 3]
    assert [lad.k(l) for l in lad.levels] == [16, 32, 64, 128]
    assert lad.h(3) == 1 / 128
    with pytest.raises(ValueError):
        LevelLadder(BiasParam(16), 1, 3)
    with pytest.raises(ValueError):
        LevelLadder(BiasParam(16), 2, -1)
    with pytest.raises(OverflowError):
        LevelLadder(BiasParam(16), 2, 62)


def test_draw_counts():
    assert nested_draw_count(BiasParam(8)) == 8
    lad = LevelLadder(BiasParam(4), 3, 2)
    assert [coupled_draw_count(lad, l) for l in lad.levels] == [4, 12, 36]


# -- streams ------------------------------------------------------------------

def test_stream_is_keyed():
    a = stream(11, 3, 1).standard_normal(5)
    b = stream(11, 3, 1).standard_normal(5)
    c = stream(11, 1, 3).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_from_seed_sequence_extends_key():
    ss = np.random.SeedSequence(5, spawn_key=(2,))
    np.testing.assert_array_equal(stream(ss, 7).random(4), stream(5, 2, 7).random(4))


# -- nested samples -----------------------------------------------------------

@pytest.mark.parametrize("model", MODELS, ids=["option", "swap"])
def test_nested_samples_deterministic(model):
    a = nested_samples(model, BiasParam(5), stream(1, 2), 50)
    b = nested_samples(model, BiasParam(5), stream(1, 2), 50)
    np.testing.assert_array_equal(a, b)


def test_single_inner_draw():
    m = OptionModel()
    g = stream(9)
    y, z = g.standard_normal(2)
    assert sample_nested(m, BiasParam(1), stream(9)) == pytest.approx(
        -1.0 - float(m.phi(y, z)), rel=1e-14)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_nested_converges_for_fixed_outer_draw(seed):
    # Reproduce the outer draw on a cloned stream, then compare the nested
    # average with the exact conditional loss.  Var(phi | y) = 4a^2 b^2 + 2b^4
    # with a = sqrt(delta) y and b^2 = 1 - delta.
    m = OptionModel()
    k = 1_000_000
    x = sample_nested(m, BiasParam(k), stream(seed, 4))
    y = float(stream(seed, 4).standard_normal())
    a2, b2 = m.params.delta * y * y, 1.0 - m.params.delta
    se = math.sqrt((4 * a2 * b2 + 2 * b2 * b2) / k)
    assert abs(x - option_exact_loss(y, m.params)) < 4 * se


def test_nested_option_loss_is_centred():
    xs = nested_samples(OptionModel(), BiasParam(4), stream(21), 400_000)
    assert abs(xs.mean()) < 4 * xs.std() / math.sqrt(xs.size)


# -- coupled pairs ------------------------------------------------------------

def test_pair_from_payoffs_example():
    assert pair_from_payoffs([3.0, 5.0], 2) == (3.0, 4.0)
    coarse, fine = pair_from_payoffs([1.0, 2.0, 4.0, 8.0, 16.0, 32.0], 3)
    assert coarse == 1.5 and fine == pytest.approx(10.5, rel=1e-15)
    with pytest.raises(ValueError):
        pair_from_payoffs([1.0, 2.0, 3.0], 2)


def test_pair_from_payoffs_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        k, m = int(rng.integers(1, 20)), int(rng.integers(2, 5))
        p = rng.standard_normal(k * m) * 10.0 ** rng.uniform(-3, 3)
        coarse, fine = pair_from_payoffs(p, m)
        scale = np.abs(p).max()
        assert abs(coarse - p[:k].mean()) <= 1e-12 * scale
        assert abs(fine - p.mean()) <= 1e-12 * scale


@pytest.mark.parametrize("model", MODELS, ids=["option", "swap"])
@given(level=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_coupled_pair_telescopes(model, level, seed):
    # One coupled pair reads the outer draw, then k_{l-1} inner draws, then
    # the remaining k_l - k_{l-1}.  The coarse member is therefore the nested
    # sample at h_{l-1} on the same stream and the fine member the nested
    # sample at h_l, up to the recursive summation order.
    lad = LevelLadder(BiasParam(2), 2, 3)
    coarse, fine = sample_coupled_pair(model, lad, level, stream(seed))
    assert coarse == sample_nested(model, BiasParam(lad.k(level - 1)), stream(seed))
    ref = sample_nested(model, BiasParam(lad.k(level)), stream(seed))
    assert fine == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_coupled_pair_matches_payoff_construction():
    m = OptionModel()
    lad = LevelLadder(BiasParam(3), 2, 1)
    coarse, fine = sample_coupled_pair(m, lad, 1, stream(8))
    g = stream(8)
    y = g.standard_normal()
    z = g.standard_normal(6)
    c_ref, f_ref = pair_from_payoffs(m.phi(y, z), 2)
    assert coarse == pytest.approx(-1.0 - c_ref, rel=1e-14)
    assert fine == pytest.approx(-1.0 - f_ref, rel=1e-14)


def test_coupled_level_zero_rejected():
    lad = LevelLadder(BiasParam(2), 2, 2)
    with pytest.raises(ValueError):
        coupled_samples(OptionModel(), lad, 0, stream(0), 3)
    with pytest.raises(ValueError):
        coupled_samples(OptionModel(), lad, 3, stream(0), 3)


def test_coupled_difference_shrinks_with_level():
    m = OptionModel()
    lad = LevelLadder(BiasParam(2), 2, 4)
    var = []
    for level in (1, 2, 3, 4):
        c, f = coupled_samples(m, lad, level, stream(3, level), 40_000)
        var.append(np.var(f - c))
    assert all(b < a for a, b in zip(var, var[1:]))
