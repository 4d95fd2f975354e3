"""Nested loss samplers, coupled coarse/fine pairs and keyed random streams.

Random streams are keyed, not spawned: ``stream(seed, rep, level)`` always
returns the same generator state for the same key, whatever order the
replications or levels are executed in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mlsa_risk._numerics import pair_means
from mlsa_risk.models import LossModel

__all__ = [
    "BiasParam",
    "LevelLadder",
    "stream",
    "sample_nested",
    "sample_coupled_pair",
    "nested_samples",
    "coupled_samples",
    "pair_from_payoffs",
    "nested_draw_count",
    "coupled_draw_count",
]

_INT64_MAX = np.iinfo(np.int64).max


def stream(seed, *key: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *key)``.

    ``seed`` may be an int or a :class:`numpy.random.SeedSequence`; in the
    latter case ``key`` extends its spawn key.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + key)
    else:
        ss = np.random.SeedSequence(int(seed), spawn_key=key)
    bitgen = np.random.SFC64(ss)
    # numpy builds the ctypes interface of a bit generator lazily, on the
    # first hand-off to a jitted kernel.  Building it here keeps that one-off
    # cost out of timed runs.
    bitgen.ctypes
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class BiasParam:
    """Inner sample count ``k``; the bias parameter is ``h = 1 / k``."""

    k: int

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError(f"inner sample count must be a positive integer, got {self.k!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.k

    @classmethod
    def from_h(cls, h: float) -> "BiasParam":
        k = round(1.0 / h)
        if abs(k * h - 1.0) > 1e-9:
            raise ValueError(f"h must be the reciprocal of an integer, got {h!r}")
        return cls(k)


@dataclass(frozen=True)
class LevelLadder:
    """Geometric bias ladder ``h_l = h0 / m**l`` for ``l = 0..l_max``."""

    h0: BiasParam
    m: int = 2
    l_max: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError(f"geometric factor must be >= 2, got {self.m}")
        if self.l_max < 0:
            raise ValueError(f"level count must be >= 0, got {self.l_max}")
        if self.h0.k * self.m ** self.l_max > _INT64_MAX:
            raise OverflowError("finest inner sample count overflows int64")

    @property
    def levels(self) -> range:
        return range(self.l_max + 1)

    def k(self, level: int) -> int:
        """Inner sample count at ``level``."""
        return self.h0.k * self.m ** level

    def h(self, level: int) -> float:
        return 1.0 / self.k(level)


def nested_draw_count(bias: BiasParam) -> int:
    """Inner draws consumed by one nested sample."""
    return bias.k


def coupled_draw_count(ladder: LevelLadder, level: int) -> int:
    """Inner draws consumed by one coupled pair at ``level`` (or one nested sample at 0)."""
    return ladder.k(level)


def nested_samples(model: LossModel, bias: BiasParam, rng: np.random.Generator,
                   size: int) -> np.ndarray:
    out = np.empty(size)
    model.fill_nested(rng, out, bias.k)
    return out


def sample_nested(model: LossModel, bias: BiasParam, rng: np.random.Generator) -> float:
    """One draw of the loss estimated with ``bias.k`` inner simulations."""
    return float(nested_samples(model, bias, rng, 1)[0])


def coupled_samples(model: LossModel, ladder: LevelLadder, level: int,
                    rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
    if not 1 <= level <= ladder.l_max:
        raise ValueError(f"coupled pairs exist for levels 1..{ladder.l_max}, got {level}")
    coarse = np.empty(size)
    fine = np.empty(size)
    model.fill_coupled(rng, coarse, fine, ladder.k(level - 1), ladder.m)
    return coarse, fine


def sample_coupled_pair(model: LossModel, ladder: LevelLadder, level: int,
                        rng: np.random.Generator) -> tuple[float, float]:
    """One coupled ``(X_{h_{l-1}}, X_{h_l})`` pair sharing the outer and inner draws."""
    coarse, fine = coupled_samples(model, ladder, level, rng, 1)
    return float(coarse[0]), float(fine[0])


def pair_from_payoffs(payoffs, m: int) -> tuple[float, float]:
    """Coarse and fine inner means of a payoff vector of length ``k * m``.

    Same arithmetic as the sampling kernels; exposed for testing the
    recursive fine-mean construction.
    """
    payoffs = np.asarray(payoffs, dtype=float)
    n = payoffs.shape[0]
    if n % m:
        raise ValueError("payoff count must be a multiple of m")
    k = n // m
    return pair_means(float(np.sum(payoffs[:k])), float(np.sum(payoffs[k:])), k, m)
