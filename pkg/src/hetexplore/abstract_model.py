"""Cell-level abstraction of heterogeneous exploration.

Agents hop between the cells of a finite set; each visited cell's belief
contracts toward its ground truth. This module provides the stepping
rules, the entropy-decrease bound certificate and the heterogeneity
threshold ``p_bar`` that separates agents with different ``alpha``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .behavioral_entropy import behavioral_entropy

_BLOCKED = -1e18


@dataclass
class AbstractWorld:
    """Cells ``0..n-1`` with symmetric path lengths, beliefs and ground truth."""

    eta: np.ndarray
    p: np.ndarray
    p_star: np.ndarray
    lam: float = 0.5
    hypothesis: bool = field(init=False)

    def __post_init__(self):
        self.eta = np.asarray(self.eta, float)
        self.p = np.asarray(self.p, float).copy()
        self.p_star = np.asarray(self.p_star, float)
        n = len(self.p)
        if self.eta.shape != (n, n) or self.p_star.shape != (n,):
            raise ValueError("eta must be n x n and p_star length n")
        off = ~np.eye(n, dtype=bool)
        if np.any(self.eta[off] <= 0):
            raise ValueError("eta must be positive off the diagonal")
        if not np.allclose(self.eta, self.eta.T):
            raise ValueError("eta must be symmetric")
        if not 0.0 <= self.lam < 1.0:
            raise ValueError("lam must lie in [0, 1)")
        if not np.all(np.isin(self.p_star, (0.0, 1.0))):
            raise ValueError("ground truth must be 0 or 1")
        self.hypothesis = bool(np.all(np.abs(self.p - self.p_star) < 0.5))

    @property
    def n(self) -> int:
        return len(self.p)

    def total_entropy(self) -> float:
        return float(np.sum(behavioral_entropy(self.p, 1.0)))

    def distance_ratios(self) -> tuple[float, float]:
        """``(d_m, d_M)``: min and max ratio of two off-diagonal path lengths."""
        vals = self.eta[~np.eye(self.n, dtype=bool)]
        return float(vals.min() / vals.max()), float(vals.max() / vals.min())


@dataclass
class AgentConfig:
    alphas: list
    positions: list

    def __post_init__(self):
        if len(self.alphas) != len(self.positions):
            raise ValueError("one alpha per agent position")


def cell_values(world: AbstractWorld, agents: AgentConfig) -> np.ndarray:
    """``V[i, k] = H_{alpha_i}(p_k) / eta(x_i, k)``; the agent's own cell is ``nan``."""
    V = np.empty((len(agents.alphas), world.n))
    for i, (a, x) in enumerate(zip(agents.alphas, agents.positions)):
        with np.errstate(divide="ignore", invalid="ignore"):
            V[i] = behavioral_entropy(world.p, a) / world.eta[x]
        V[i, x] = np.nan
    return V


def raw_targets(world: AbstractWorld, agents: AgentConfig) -> list[int]:
    """Each agent's own best cell, ignoring the others (lowest index on ties)."""
    return [int(np.nanargmax(row)) for row in cell_values(world, agents)]


def assign_step(world: AbstractWorld, agents: AgentConfig) -> list[int]:
    """Move every agent to a distinct cell other than its current one.

    Cells are handed out by a maximum-total-value assignment, which reduces
    to each agent's own best cell whenever those are already distinct.
    """
    m = len(agents.positions)
    if world.n < m:
        raise ValueError("fewer cells than agents")
    V = cell_values(world, agents)
    raw = [int(np.nanargmax(row)) for row in V]
    if len(set(raw)) == m:
        return raw
    gain = np.where(np.isnan(V), _BLOCKED, V)
    rows, cols = linear_sum_assignment(gain, maximize=True)
    out = [0] * m
    for r, c in zip(rows, cols):
        out[r] = int(c)
    return out


def contract(p, p_star, lam: float):
    """Tight contraction ``p* + lam (p - p*)``."""
    return p_star + lam * (np.asarray(p, float) - p_star)


def belief_step(world: AbstractWorld, visited, rng: np.random.Generator | None = None) -> np.ndarray:
    """New beliefs: visited cells contract toward the truth, others unchanged.

    With ``rng`` each visited cell uses its own factor drawn from
    ``U[0, lam]`` instead of ``lam`` (a noisier map that still contracts).
    """
    p = world.p.copy()
    idx = np.unique(np.asarray(list(visited), int))
    if idx.size:
        lam = world.lam if rng is None else rng.uniform(0.0, world.lam, idx.size)
        p[idx] = contract(p[idx], world.p_star[idx], lam)
    return p


def entropy_decrease_bound(p_before, p_star, visited, lam: float, t: int) -> float:
    """Upper bound on one step's change in total Shannon entropy.

    Sums ``(log(1 - p) - log p) * (lam**t / 2 - (p - p*))`` over the cells
    the agents move to, evaluated at the pre-step beliefs. Returns ``-inf``
    when one of those beliefs is already 0 or 1 (the log diverges).
    """
    total = 0.0
    for k in visited:
        pk, sk = float(p_before[k]), float(p_star[k])
        if pk <= 0.0 or pk >= 1.0:
            return -math.inf
        total += (math.log1p(-pk) - math.log(pk)) * (0.5 * lam ** t - (pk - sk))
    return total


def _scaled_roots(a_i: float, a_j: float, c1: float, c2: float, points: int) -> list[float]:
    def f(p):
        return c1 * behavioral_entropy(p, a_i) - c2 * behavioral_entropy(p, a_j)

    grid = np.linspace(0.0, 1.0, points + 1)[1:-1]
    vals = f(grid)
    roots = [float(x) for x, v in zip(grid, vals) if v == 0.0]
    sign_change = np.nonzero(vals[:-1] * vals[1:] < 0)[0]
    for k in sign_change:
        roots.append(brentq(f, grid[k], grid[k + 1], xtol=1e-12))
    return roots


def compute_pbar(alpha_i: float, alpha_j: float, d_m: float, d_M: float, points: int = 10_000) -> float:
    """Smallest crossing in (0, 1) of the two distance-scaled BE curves."""
    if alpha_i == alpha_j:
        raise ValueError("alphas must differ")
    if not 0 < d_m <= d_M:
        raise ValueError("need 0 < d_m <= d_M")
    roots = _scaled_roots(alpha_i, alpha_j, d_M, d_m, points)
    roots += _scaled_roots(alpha_i, alpha_j, d_m, d_M, points)
    if not roots:
        raise ValueError(f"scaled entropy curves never cross for alphas {alpha_i}, {alpha_j}")
    return min(roots)


def team_pbar(alphas, d_m: float, d_M: float) -> float:
    return min(compute_pbar(a, b, d_m, d_M) for a, b in combinations(alphas, 2))


@dataclass
class StepRecord:
    step: int
    positions: list
    raw: list
    entropy: float
    delta: float
    bound: float
    distinct: bool
    lemma_ok: bool
    bound_negative: bool


@dataclass
class Trajectory:
    records: list
    beliefs: list

    @property
    def distinct_violations(self) -> int:
        return sum(not r.distinct for r in self.records)

    @property
    def lemma_violations(self) -> int:
        return sum(not r.lemma_ok for r in self.records)

    @property
    def bound_sign_violations(self) -> int:
        return sum(not r.bound_negative for r in self.records)

    @property
    def raw_collisions(self) -> int:
        return sum(len(set(r.raw)) < len(r.raw) for r in self.records)

    def entropies(self) -> list[float]:
        return [r.entropy for r in self.records]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "agent", "cell", "H", "bound"])
            for r in self.records:
                for a, c in enumerate(r.positions):
                    w.writerow([r.step, a, c, repr(r.entropy), repr(r.bound)])


def run_abstract(world: AbstractWorld, agents: AgentConfig, steps: int,
                 rng: np.random.Generator | None = None) -> Trajectory:
    """Alternate :func:`assign_step` and :func:`belief_step`, recording the certificate.

    For each step ``t`` the realized entropy change is compared against
    :func:`entropy_decrease_bound`; when the bound is ``-inf`` the change
    is compared against 0 instead. The sign check flags finite bounds that
    are not negative.
    """
    world = AbstractWorld(world.eta, world.p, world.p_star, world.lam)
    pos = list(agents.positions)
    records, beliefs = [], [world.p.copy()]
    for t in range(steps):
        cfg = AgentConfig(agents.alphas, pos)
        raw = raw_targets(world, cfg)
        new_pos = assign_step(world, cfg)
        h0 = world.total_entropy()
        bound = entropy_decrease_bound(world.p, world.p_star, new_pos, world.lam, t)
        world.p = belief_step(world, new_pos, rng)
        h1 = world.total_entropy()
        delta = h1 - h0
        tol = 1e-12
        if math.isinf(bound):
            ok, negative = delta <= tol, True
        else:
            ok, negative = delta <= bound + tol, bound < 0
        records.append(StepRecord(t, new_pos, raw, h1, delta, bound,
                                  len(set(new_pos)) == len(new_pos), ok, negative))
        beliefs.append(world.p.copy())
        pos = new_pos
    return Trajectory(records, beliefs)
