"""Frontier-allocation game and the d-PBRAG dynamics.

The game assigns every task (frontier) to exactly one agent. Each agent
holds a weight ``w[i, q]`` in [0, 1] per task it can see; the dynamics push
the weight of the unique dominating agent of a task to 1 and all others to
0, using max/submax consensus over a time-varying graph to learn the two
largest reward estimates.

Internally everything is dense ``(n_agents, n_tasks)`` arrays. Entries for
tasks an agent cannot see are masked; their consensus registers hold
``-inf`` so they never win a max or submax.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Mapping

import numpy as np

NEG = -np.inf


class InfeasibleError(ValueError):
    """Some task is not available to any agent."""


class IncompleteAssignmentError(ValueError):
    """No agent's weight clears the threshold for some tasks."""

    def __init__(self, orphans):
        self.orphans = list(orphans)
        super().__init__(f"no weight above threshold for tasks {self.orphans}")


class TieWarning(UserWarning):
    pass


def clamp_unit(x):
    """``max(0, min(x, 1))``, elementwise for arrays."""
    if np.ndim(x) == 0:
        return max(0.0, min(float(x), 1.0))
    return np.clip(x, 0.0, 1.0)


def submax(values) -> float:
    """Largest value strictly below the max, ignoring ``-inf``.

    When every finite value equals the max the set of smaller values is
    empty and the max itself is returned.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return NEG
    top = v.max()
    below = v[v < top]
    return float(below.max()) if below.size else float(top)


@dataclass
class RewardTable:
    """Per-(agent, task) rewards. A key present in ``rho`` means available."""

    agents: list
    tasks: list
    rho: dict

    def __post_init__(self):
        self.agents = list(self.agents)
        self.tasks = list(self.tasks)
        self.rho = {k: float(v) for k, v in self.rho.items()}
        known_a, known_q = set(self.agents), set(self.tasks)
        for (i, q), v in self.rho.items():
            if i not in known_a or q not in known_q:
                raise ValueError(f"reward key {(i, q)!r} references unknown agent/task")
            if not math.isfinite(v):
                raise ValueError(f"reward for {(i, q)!r} is not finite")

    @classmethod
    def from_matrix(cls, matrix, agents=None, tasks=None, mask=None) -> "RewardTable":
        m = np.asarray(matrix, dtype=float)
        agents = list(range(m.shape[0])) if agents is None else list(agents)
        tasks = list(range(m.shape[1])) if tasks is None else list(tasks)
        mask = np.ones(m.shape, bool) if mask is None else np.asarray(mask, bool)
        rho = {
            (agents[a], tasks[q]): m[a, q]
            for a in range(m.shape[0])
            for q in range(m.shape[1])
            if mask[a, q]
        }
        return cls(agents, tasks, rho)

    @property
    def availability(self) -> set:
        return set(self.rho)

    def holders(self, q) -> list:
        return [i for i in self.agents if (i, q) in self.rho]

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense rewards (``-inf`` where unavailable) and the availability mask."""
        mat = np.full((len(self.agents), len(self.tasks)), NEG)
        a_idx = {a: k for k, a in enumerate(self.agents)}
        q_idx = {q: k for k, q in enumerate(self.tasks)}
        for (i, q), v in self.rho.items():
            mat[a_idx[i], q_idx[q]] = v
        return mat, np.isfinite(mat)

    def uncovered(self) -> list:
        covered = {q for (_, q) in self.rho}
        return [q for q in self.tasks if q not in covered]


@dataclass
class Partition:
    """Task ownership: agent -> set of tasks."""

    assignment: dict

    def owner_of(self) -> dict:
        return {q: i for i, qs in self.assignment.items() for q in qs}

    def is_partition_of(self, tasks) -> bool:
        seen = [q for qs in self.assignment.values() for q in qs]
        return len(seen) == len(set(seen)) and set(seen) == set(tasks)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.owner_of() == other.owner_of()


def dominating_agents(rewards: RewardTable, q) -> set:
    if q not in rewards.tasks:
        raise KeyError(f"unknown task {q!r}")
    holders = rewards.holders(q)
    if not holders:
        return set()
    best = max(rewards.rho[(i, q)] for i in holders)
    return {i for i in holders if rewards.rho[(i, q)] >= best}


def brute_force_partition(rewards: RewardTable) -> Partition:
    """Maximizer of the total-reward partition problem.

    The objective separates per task, so each task goes to a dominating
    agent; ties go to the lowest agent id. See :func:`enumerate_partitions`
    for the exhaustive version used as a test oracle.
    """
    missing = rewards.uncovered()
    if missing:
        raise InfeasibleError(f"tasks with no available agent: {missing}")
    assignment = {i: set() for i in rewards.agents}
    for q in rewards.tasks:
        assignment[min(dominating_agents(rewards, q))].add(q)
    return Partition(assignment)


def partition_value(rewards: RewardTable, part: Partition) -> float:
    return sum(rewards.rho[(i, q)] for i, qs in part.assignment.items() for q in qs)


def enumerate_partitions(rewards: RewardTable):
    """Yield every feasible partition (exponential; for small oracles only)."""
    choices = [rewards.holders(q) for q in rewards.tasks]
    for owners in product(*choices):
        assignment = {i: set() for i in rewards.agents}
        for q, i in zip(rewards.tasks, owners):
            assignment[i].add(q)
        yield Partition(assignment)


def mu_band_limit(rewards: RewardTable, q) -> float:
    """Half the gap between the largest and second-largest reward for ``q``.

    Estimate noise must stay strictly below this for the dynamics to keep
    the right dominating agent. ``inf`` when fewer than two agents hold ``q``.
    """
    vals = [rewards.rho[(i, q)] for i in rewards.holders(q)]
    if len(vals) < 2:
        return math.inf
    vals.sort(reverse=True)
    return 0.5 * (vals[0] - vals[1])


def game_utility(i, w: Mapping, rewards: RewardTable) -> float:
    """Utility of agent ``i`` under weight profile ``w[(agent, task)]``."""
    total = 0.0
    for q in rewards.tasks:
        if (i, q) not in rewards.rho:
            continue
        wi = w.get((i, q), 0.0)
        comp = [
            rewards.rho[(j, q)] * w.get((j, q), 0.0)
            for j in rewards.holders(q)
            if j != i
        ]
        total += rewards.rho[(i, q)] * wi - (max(comp) if comp else 0.0) * wi
    return total


def switch(m, f, t: int, T: int):
    """``f`` on injection steps (``t % T == 0``), ``m`` otherwise."""
    if T < 1:
        raise ValueError("T must be >= 1")
    return f if t % T == 0 else m


@dataclass(frozen=True)
class StepSchedule:
    """Injection period ``T``, connectivity period ``tau`` and step sizes.

    Within period ``k`` the step size is ``alpha_seq(k)`` on the first
    ``2 * tau`` steps (consensus still settling) and ``beta_seq(k)`` after.
    The defaults ``a0 / (k + 1)`` and ``b0 * (k + 1)`` satisfy
    ``alpha -> 0`` and ``beta -> inf``.
    """

    T: int = 8
    tau: int = 1
    a0: float = 0.05
    b0: float = 0.5
    alpha_seq: Callable[[int], float] | None = None
    beta_seq: Callable[[int], float] | None = None
    pool: str = "top2"

    def __post_init__(self):
        if self.tau < 1 or self.T < 1:
            raise ValueError("T and tau must be positive")
        if not self.T > 2 * self.tau + 1:
            raise ValueError(f"need T > 2*tau + 1, got T={self.T}, tau={self.tau}")

    def alpha(self, k: int) -> float:
        return self.alpha_seq(k) if self.alpha_seq else self.a0 / (k + 1)

    def beta(self, k: int) -> float:
        return self.beta_seq(k) if self.beta_seq else self.b0 * (k + 1)


def step_size(t: int, schedule: StepSchedule, i=None, q=None) -> float:
    # i, q accepted for per-(agent, task) schedules; the defaults are uniform
    k, off = divmod(t, schedule.T)
    return schedule.alpha(k) if off < 2 * schedule.tau else schedule.beta(k)


@dataclass
class AllocationState:
    """Weights and consensus registers, all ``(n_agents, n_tasks)``."""

    w: np.ndarray
    M: np.ndarray
    S: np.ndarray
    e: np.ndarray
    mask: np.ndarray
    t: int = 0
    agents: list = field(default_factory=list)
    tasks: list = field(default_factory=list)
    tie_warning: bool = False

    @classmethod
    def initial(cls, z0: np.ndarray, mask: np.ndarray, w0=1.0, agents=None, tasks=None):
        """Registers start at each agent's own first estimate ``z0``."""
        mask = np.asarray(mask, bool)
        z0 = np.where(mask, np.asarray(z0, float), NEG)
        w = np.where(mask, np.broadcast_to(np.asarray(w0, float), mask.shape), 0.0)
        n, m = mask.shape
        return cls(
            w=clamp_unit(w.astype(float)),
            M=z0.copy(),
            S=z0.copy(),
            e=z0.copy(),
            mask=mask,
            agents=list(range(n)) if agents is None else list(agents),
            tasks=list(range(m)) if tasks is None else list(tasks),
        )

    def weights(self) -> dict:
        return {
            (self.agents[a], self.tasks[q]): float(self.w[a, q])
            for a, q in zip(*np.nonzero(self.mask))
        }


def _closed(adj: np.ndarray) -> np.ndarray:
    a = np.array(adj, dtype=bool, copy=True)
    np.fill_diagonal(a, True)
    return a


def _submax_rows(stack: np.ndarray) -> np.ndarray:
    """Submax along axis 1 of a ``(n, k, m)`` stack, with the all-equal rule."""
    top = stack.max(axis=1)
    below = np.where(stack < top[:, None, :], stack, NEG).max(axis=1)
    return np.where(np.isfinite(below), below, top)


def consensus_step(M, S, e, adj_next, z_next, t_next: int, T: int, mask, pool: str = "top2"):
    """Max/submax consensus with periodic re-injection, one synchronous round.

    ``adj_next[j, i]`` is True when ``j`` sends to ``i`` at ``t_next``.
    Returns ``(M, S, e)`` at ``t_next``.

    The submax of agent ``i`` is taken over its neighbours' ``S`` together
    with its own ``M`` and ``e``. With ``pool="top2"`` (default) the
    neighbours' ``M`` join the pool as well, which makes ``(M, S)`` the exact
    top two of every value that has reached ``i``; the narrower
    ``pool="own"`` variant can need up to twice as many steps to settle.
    """
    closed = _closed(adj_next)
    # nbr[i, j, q] = M[j, q] if j in closed neighbourhood of i
    sel = closed.T[:, :, None]
    nbr_M = np.where(sel, M[None, :, :], NEG)
    nbr_S = np.where(sel, S[None, :, :], NEG)
    max_M = nbr_M.max(axis=1)
    parts = [nbr_S, M[:, None, :], e[:, None, :]]
    if pool == "top2":
        parts.append(nbr_M)
    elif pool != "own":
        raise ValueError(f"unknown submax pool {pool!r}")
    sub_S = _submax_rows(np.concatenate(parts, axis=1))
    if t_next % T == 0:
        e_new = np.where(mask, z_next, NEG)
        M_new = e_new.copy()
        S_new = e_new.copy()
    else:
        e_new, M_new, S_new = e.copy(), max_M, sub_S
    M_new = np.where(mask, M_new, NEG)
    S_new = np.where(mask, S_new, NEG)
    return M_new, S_new, e_new


def dpbrag_step(state: AllocationState, z_next, adj_next, schedule: StepSchedule) -> AllocationState:
    """One synchronous d-PBRAG round ``t -> t + 1``.

    The weight update uses the pre-step registers and the agent's own held
    estimate ``e``; registers then advance through :func:`consensus_step`.
    """
    t = state.t
    gamma = step_size(t, schedule)
    mask = state.mask
    with np.errstate(invalid="ignore"):  # -inf - -inf off the mask, discarded below
        drive = np.where(mask, state.e - 0.5 * (state.M + state.S), 0.0)
    w = np.where(mask, clamp_unit(state.w + gamma * drive), 0.0)
    z_next = np.asarray(z_next, float)
    M, S, e = consensus_step(
        state.M, state.S, state.e, adj_next, z_next, t + 1, schedule.T, mask, schedule.pool
    )
    return replace(state, w=w, M=M, S=S, e=e, t=t + 1)


def default_rounds(schedule: StepSchedule, periods: int = 12) -> int:
    return int(math.ceil(periods * schedule.T))


def _has_ties(mat: np.ndarray, mask: np.ndarray) -> bool:
    for q in range(mat.shape[1]):
        col = mat[mask[:, q], q]
        if col.size >= 2 and np.sum(col == col.max()) > 1:
            return True
    return False


def run_dpbrag(
    rewards: RewardTable,
    graphs,
    schedule: StepSchedule | None = None,
    rounds: int | None = None,
    w0=1.0,
    estimates: Callable[[int], np.ndarray] | None = None,
) -> AllocationState:
    """Run d-PBRAG for ``rounds`` steps.

    ``graphs`` is a :class:`~hetexplore.network.GraphSequence` (or any
    callable ``t -> adjacency``). Without ``estimates`` the agents inject
    the exact rewards; otherwise ``estimates(t)`` gives the ``(n, m)``
    estimate matrix injected at ``t``. Weights start at ``w0`` (all ones by
    default, as each explorer does before communicating).
    """
    schedule = schedule or StepSchedule()
    rounds = default_rounds(schedule) if rounds is None else rounds
    mat, mask = rewards.matrix()
    if estimates is None:
        exact = np.where(mask, mat, 0.0)

        def estimates(_t):
            return exact

    adjacency = getattr(graphs, "adjacency", graphs)
    state = AllocationState.initial(estimates(0), mask, w0, rewards.agents, rewards.tasks)
    if _has_ties(mat, mask):
        state.tie_warning = True
        warnings.warn("tied dominating agents; convergence is not guaranteed", TieWarning)
    for t in range(rounds):
        state = dpbrag_step(state, estimates(t + 1), adjacency(t + 1), schedule)
    return state


def extract_assignment(state: AllocationState, threshold: float = 0.5) -> Partition:
    """Give each task to the agent with the largest weight above ``threshold``.

    Weight ties go to the lowest agent index.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    w = np.where(state.mask, state.w, -1.0)
    assignment = {a: set() for a in state.agents}
    orphans = []
    for q, task in enumerate(state.tasks):
        best = int(np.argmax(w[:, q]))
        if w[best, q] > threshold:
            assignment[state.agents[best]].add(task)
        else:
            orphans.append(task)
    if orphans:
        raise IncompleteAssignmentError(orphans)
    return Partition(assignment)


def random_instance(rng: np.random.Generator, n_agents: int, n_tasks: int, partial: bool = False) -> RewardTable:
    """Continuous i.i.d. rewards on [0, 1); optional random availability.

    With ``partial`` every task keeps at least one holder.
    """
    mat = rng.random((n_agents, n_tasks))
    mask = np.ones_like(mat, bool)
    if partial:
        mask = rng.random(mat.shape) < 0.7
        for q in range(n_tasks):
            if not mask[:, q].any():
                mask[rng.integers(n_agents), q] = True
    return RewardTable.from_matrix(mat, mask=mask)

