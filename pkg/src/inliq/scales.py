"""Preferred-scale calibration: equal-probability ladders and entropy maximization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dc import ThresholdLadder
from .info import entropy_rate, stationary_distribution, surprise_variance_rate
from .markov import analytic_matrix

OBJECTIVES = ("equal-prob", "max-h1", "max-h2")
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LadderSearchConfig:
    """One-dimensional search over geometric ladders delta_i = ratio * delta_{i-1}."""

    n: int
    delta1: float
    objective: str = "max-h1"
    ratio_lo: float = 1.01
    ratio_hi: float = 4.0
    tol: float = 1e-6
    seed: int = 0
    h2_chain_length: int = 2_000_000
    h2_lag: int = 64

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if not self.ratio_lo > 1.0:
            raise ValueError("ratio bounds must exceed 1")
        if not self.ratio_hi > self.ratio_lo:
            raise ValueError("ratio_hi must exceed ratio_lo")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.n < 1 or self.delta1 <= 0:
            raise ValueError("need n >= 1 and delta1 > 0")


def equal_probability_ladder(delta1: float, n: int) -> ThresholdLadder:
    """Ladder making every achievable transition a fair coin flip.

    Setting all branch probabilities to one half forces the ratio factors
    a_k = (k-1)/k, i.e.

        delta_k = delta1 * prod_{i=1}^{k-1} (1 + log(1 + 1/i)),

    anchored by delta2 = (1 + log 2) delta1.  The thresholds grow
    asymptotically linearly: delta_k / (delta1 k) tends to the constant
    returned by :func:`spacing_constant`.
    """
    if delta1 <= 0 or n < 1:
        raise ValueError("need delta1 > 0 and n >= 1")
    i = np.arange(1, n)
    factors = np.concatenate([[1.0], np.cumprod(1.0 + np.log1p(1.0 / i))])
    return ThresholdLadder(tuple(delta1 * factors))


def spacing_constant(k: int) -> float:
    """delta_k / (delta1 * k) of the equal-probability ladder at index k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    i = np.arange(1, k)
    log_prod = np.sum(np.log1p(np.log1p(1.0 / i)))
    return float(math.exp(log_prod) / k)


def golden_section_max(f, lo: float, hi: float, tol: float):
    """Maximize a unimodal function on [lo, hi]; returns (x, f(x))."""
    a, b = float(lo), float(hi)
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def _objective(config: LadderSearchConfig):
    def equal_prob(ratio):
        m = analytic_matrix(ThresholdLadder.geometric(config.delta1, config.n, ratio))
        far = m.succ[:, 1] >= 0
        if not np.any(far):
            return 0.0
        return -float(np.max(np.abs(m.probs[far, 1] - 0.5)))

    def max_h1(ratio):
        m = analytic_matrix(ThresholdLadder.geometric(config.delta1, config.n, ratio))
        return entropy_rate(m, stationary_distribution(m))

    def max_h2(ratio):
        m = analytic_matrix(ThresholdLadder.geometric(config.delta1, config.n, ratio))
        return surprise_variance_rate(m, config.h2_chain_length, config.h2_lag,
                                      seed=config.seed)

    return {"equal-prob": equal_prob, "max-h1": max_h1, "max-h2": max_h2}[config.objective]


def optimize_ladder(config: LadderSearchConfig):
    """Golden-section search of the geometric family for the configured objective.

    The h2 objective reuses one seed for every evaluation so the search
    is deterministic.  Returns (ladder, objective value at the optimum).
    """
    f = _objective(config)
    ratio, value = golden_section_max(f, config.ratio_lo, config.ratio_hi, config.tol)
    ladder = ThresholdLadder.geometric(config.delta1, config.n, ratio)
    return ladder, value
