"""Distributionally robust reward estimates over 1-Wasserstein balls.

For a distribution on a bounded interval ``[lo, hi]`` the largest mean
reachable within transport budget ``eps`` is found by pushing mass upward
at unit cost per unit distance, so it equals ``mean + min(eps, hi - mean)``
(and symmetrically for the smallest). Unbounded support would make the
midpoint estimate collapse to the sample mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Equally weighted atoms on a closed support interval."""

    atoms: tuple
    lo: float
    hi: float

    def __init__(self, atoms, lo: float, hi: float):
        arr = tuple(float(a) for a in np.ravel(np.asarray(atoms, float)))
        if not arr:
            raise ValueError("need at least one atom")
        if not lo < hi:
            raise ValueError("support needs lo < hi")
        if min(arr) < lo or max(arr) > hi:
            raise ValueError("atoms must lie inside the support")
        object.__setattr__(self, "atoms", arr)
        object.__setattr__(self, "lo", float(lo))
        object.__setattr__(self, "hi", float(hi))

    @property
    def mean(self) -> float:
        return float(np.mean(self.atoms))

    def __len__(self):
        return len(self.atoms)


@dataclass(frozen=True)
class ConcentrationParams:
    """Confidence ``theta`` and the light-tail constants of the radius formula."""

    theta: float = 0.1
    c1: float = math.e
    c2: float = 1.0
    a: float = 2.0
    m: int = 1

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if not self.a > 1:
            raise ValueError("a must exceed 1")
        if self.m < 1:
            raise ValueError("m must be a positive integer")


def epsilon_radius(N: int, params: ConcentrationParams = ConcentrationParams()) -> float:
    """Ball radius that holds the true distribution with probability ``1 - theta``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    L = math.log(params.c1 / params.theta)
    if L <= 0:
        raise ValueError("need c1 > theta so that log(c1 / theta) > 0")
    base = L / (params.c2 * N)
    if N >= L / params.c2:
        return base ** (1.0 / max(params.m, 2))
    return base ** (1.0 / params.a)


def sup_mean_ball(emp: EmpiricalDistribution, eps: float) -> float:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mu = emp.mean
    return mu + min(eps, emp.hi - mu)


def inf_mean_ball(emp: EmpiricalDistribution, eps: float) -> float:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mu = emp.mean
    return mu - min(eps, mu - emp.lo)


def dr_estimate(emp: EmpiricalDistribution, eps: float) -> float:
    """Midpoint of the worst-case mean interval."""
    return 0.5 * (sup_mean_ball(emp, eps) + inf_mean_ball(emp, eps))


def dr_estimate_from_mean(mean, eps, lo: float, hi: float):
    """Vectorized :func:`dr_estimate` given sample means and radii."""
    mean, eps = np.asarray(mean, float), np.asarray(eps, float)
    up = mean + np.minimum(eps, hi - mean)
    down = mean - np.minimum(eps, mean - lo)
    return 0.5 * (up + down)


def mean_interval(emp: EmpiricalDistribution, eps: float) -> tuple[float, float]:
    return inf_mean_ball(emp, eps), sup_mean_ball(emp, eps)


def separation_check(intervals: dict) -> dict:
    """Per task, the agent whose lower end beats every other agent's upper end.

    ``intervals[q][agent] = (inf, sup)``. Maps each task to that agent or
    ``None`` when the intervals are not separated.
    """
    out = {}
    for q, per_agent in intervals.items():
        winner = None
        for i, (lo_i, _) in per_agent.items():
            if all(lo_i > hi_j for j, (_, hi_j) in per_agent.items() if j != i):
                winner = i
                break
        out[q] = winner
    return out


def wasserstein_1d(emp1, emp2) -> float:
    """1-Wasserstein distance between two equally weighted atom sets.

    Area between the two empirical CDFs; accepts distributions or raw atoms.
    """
    a = np.sort(np.asarray(getattr(emp1, "atoms", emp1), float))
    b = np.sort(np.asarray(getattr(emp2, "atoms", emp2), float))
    if a.size == 0 or b.size == 0:
        raise ValueError("both distributions need atoms")
    grid = np.concatenate([a, b])
    grid.sort()
    deltas = np.diff(grid)
    cdf_a = np.searchsorted(a, grid[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, grid[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


class SampleStream:
    """Growing sample set for one (agent, task) pair, capped at ``cap`` atoms."""

    def __init__(self, lo: float, hi: float, cap: int = 256,
                 params: ConcentrationParams = ConcentrationParams()):
        self.lo, self.hi, self.cap, self.params = lo, hi, cap, params
        self.samples: list[float] = []

    def add(self, x: float) -> None:
        if len(self.samples) < self.cap:
            self.samples.append(min(max(float(x), self.lo), self.hi))

    def estimate(self) -> float:
        emp = EmpiricalDistribution(self.samples, self.lo, self.hi)
        return dr_estimate(emp, epsilon_radius(len(self.samples), self.params))
