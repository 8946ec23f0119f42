"""Prelec probability weighting and Behavioral Entropy (BE).

All entropies are in nats. Occupancy grids store values on a 0-100 scale;
conversion to a probability (value / 100) happens only at the entropy
boundary (see :func:`total_map_entropy`).

The functions accept Python floats or numpy arrays; scalar input gives a
float back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOG2 = math.log(2.0)


def beta_from_alpha(alpha: float) -> float:
    """Prelec scale that makes ``omega(0.5) == 0.5``: ``(log 2) ** (1 - alpha)``."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    return math.exp((1.0 - alpha) * math.log(LOG2))


@dataclass(frozen=True)
class BehaviorParam:
    """Prelec exponent ``alpha`` and scale ``beta``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta!r}")

    @classmethod
    def from_alpha(cls, alpha: float) -> "BehaviorParam":
        return cls(alpha=float(alpha), beta=beta_from_alpha(alpha))


def _as_param(params: BehaviorParam | float) -> BehaviorParam:
    if isinstance(params, BehaviorParam):
        return params
    return BehaviorParam.from_alpha(params)


def _check_prob(p: np.ndarray) -> None:
    if np.any(np.isnan(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")


def _ret(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


def prelec_weight(p, params: BehaviorParam | float):
    """Prelec weight ``exp(-beta * (-log p) ** alpha)``.

    Exactly 0 at ``p == 0`` and exactly 1 at ``p == 1``. ``params`` may be a
    bare alpha, in which case beta is derived with :func:`beta_from_alpha`.
    """
    par = _as_param(params)
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    _check_prob(p)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    out[p >= 1.0] = 1.0
    pi = p[inner]
    out[inner] = np.exp(-par.beta * (-np.log(pi)) ** par.alpha)
    return _ret(out, scalar)


def _neg_xlogx(w: np.ndarray) -> np.ndarray:
    out = np.zeros_like(w)
    pos = w > 0.0
    out[pos] = -w[pos] * np.log(w[pos])
    return out


def behavioral_entropy(p, params: BehaviorParam | float):
    """Binary Behavioral Entropy ``-w(p) log w(p) - w(1-p) log w(1-p)`` in nats.

    Cells with ``p`` in {0, 1} return exactly 0 (``0 log 0 := 0``).
    """
    par = _as_param(params)
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    _check_prob(p)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    pi = p[inner]
    w1 = np.exp(-par.beta * (-np.log(pi)) ** par.alpha)
    w2 = np.exp(-par.beta * (-np.log1p(-pi)) ** par.alpha)
    out[inner] = _neg_xlogx(w1) + _neg_xlogx(w2)
    return _ret(out, scalar)


def shannon_entropy(p):
    """Binary Shannon entropy in nats (independent of the Prelec path)."""
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    _check_prob(p)
    return _ret(_neg_xlogx(p) + _neg_xlogx(1.0 - p), scalar)


def total_map_entropy(grid) -> float:
    """Sum of ``alpha = 1`` BE (Shannon) over all cells of a 0-100 grid.

    ``grid`` is an :class:`~hetexplore.world.OccupancyGrid` or a bare array.
    """
    values = getattr(grid, "values", grid)
    v = np.asarray(values, dtype=float)
    if np.any(v < 0.0) or np.any(v > 100.0):
        raise ValueError("grid values must lie in [0, 100]")
    return float(np.sum(behavioral_entropy(v / 100.0, 1.0)))


def max_entropy(params: BehaviorParam | float, points: int = 20001) -> float:
    """Largest value of the BE curve on [0, 1], by dense scan."""
    p = np.linspace(0.0, 1.0, points)
    return float(np.max(behavioral_entropy(p, params)))
