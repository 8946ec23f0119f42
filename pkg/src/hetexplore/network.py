"""Time-varying communication graphs.

Adjacency convention: ``adj[j, i]`` is True when agent ``j`` can send to
agent ``i`` (arc ``(j, i)``), so the in-neighbours of ``i`` are the True
entries of column ``i``. Self-loops are never stored; closed neighbourhoods
add them on query.

Joint connectivity is checked over windows ``(k*tau, (k+1)*tau]``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np


class DisconnectedError(ValueError):
    pass


def arcs_to_adj(n: int, arcs: Iterable[tuple[int, int]]) -> np.ndarray:
    adj = np.zeros((n, n), bool)
    for j, i in arcs:
        if not (0 <= j < n and 0 <= i < n):
            raise ValueError(f"arc {(j, i)} outside 0..{n - 1}")
        if j != i:
            adj[j, i] = True
    return adj


def adj_to_arcs(adj: np.ndarray) -> set[tuple[int, int]]:
    return {(int(j), int(i)) for j, i in zip(*np.nonzero(adj))}


@dataclass
class GraphSequence:
    """A graph per time step, produced by ``fn(t) -> adjacency``."""

    n: int
    fn: Callable[[int], np.ndarray]
    tau: int = 1

    def adjacency(self, t: int) -> np.ndarray:
        adj = np.asarray(self.fn(t), bool).copy()
        np.fill_diagonal(adj, False)
        return adj

    def arcs(self, t: int) -> set[tuple[int, int]]:
        return adj_to_arcs(self.adjacency(t))

    def window_union(self, k: int) -> np.ndarray:
        out = np.zeros((self.n, self.n), bool)
        for t in range(k * self.tau + 1, (k + 1) * self.tau + 1):
            out |= self.adjacency(t)
        return out


def neighbors_in(seq: GraphSequence, i: int, t: int, closed: bool = False) -> set[int]:
    adj = seq.adjacency(t)
    out = {int(j) for j in np.nonzero(adj[:, i])[0]}
    if closed:
        out.add(i)
    return out


def _reach(adj: np.ndarray, src: int) -> np.ndarray:
    n = adj.shape[0]
    dist = np.full(n, -1)
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in np.nonzero(adj[u])[0]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def strongly_connected(adj: np.ndarray) -> bool:
    return all((_reach(adj, s) >= 0).all() for s in range(adj.shape[0]))


def validate_assumption(seq: GraphSequence, horizon: int) -> tuple[bool, int | None]:
    """Check joint strong connectivity on every full window up to ``horizon``.

    Returns ``(True, None)`` or ``(False, k)`` for the first failing window.
    """
    if horizon < seq.tau:
        raise ValueError("horizon must be at least tau")
    for k in range(horizon // seq.tau):
        if not strongly_connected(seq.window_union(k)):
            return False, k
    return True, None


def diameter(adj: np.ndarray) -> int:
    """Longest shortest path over ordered pairs (BFS from every node)."""
    adj = np.asarray(adj, bool)
    best = 0
    for s in range(adj.shape[0]):
        d = _reach(adj, s)
        if (d < 0).any():
            raise DisconnectedError("graph is not strongly connected")
        best = max(best, int(d.max()))
    return best


def max_window_diameter(seq: GraphSequence, horizon: int) -> int:
    return max(diameter(seq.window_union(k)) for k in range(horizon // seq.tau))


def proximity_graph(positions, radius: float) -> set[tuple[int, int]]:
    """Symmetric arcs between points within Euclidean ``radius``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    pts = np.asarray(positions, float).reshape(-1, 2)
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    close = d <= radius
    np.fill_diagonal(close, False)
    return adj_to_arcs(close)


def shared_frontier_graph(visible: list[set]) -> set[tuple[int, int]]:
    """Symmetric arcs between agents whose visible frontier sets intersect."""
    n = len(visible)
    return {
        (j, i)
        for i in range(n)
        for j in range(n)
        if i != j and visible[i] & visible[j]
    }


def _ring_arcs(n: int) -> list[tuple[int, int]]:
    return [(i, (i + 1) % n) for i in range(n)] + [((i + 1) % n, i) for i in range(n)]


def complete_sequence(n: int, tau: int = 1) -> GraphSequence:
    full = ~np.eye(n, dtype=bool)
    return GraphSequence(n, lambda t: full, tau)


def static_sequence(n: int, arcs, tau: int = 1) -> GraphSequence:
    adj = arcs_to_adj(n, arcs)
    return GraphSequence(n, lambda t: adj, tau)


def ring_sequence(n: int, tau: int = 1) -> GraphSequence:
    """Bidirectional ring whose arcs are spread over ``tau`` consecutive steps.

    Arc ``a`` of the ring is active at the steps ``t`` with
    ``t % tau == a % tau``, so each window of ``tau`` steps carries the whole
    ring while single steps may be disconnected.
    """
    arcs = _ring_arcs(n) if n > 1 else []
    per_phase = [arcs_to_adj(n, [a for idx, a in enumerate(arcs) if idx % tau == ph]) for ph in range(tau)]
    return GraphSequence(n, lambda t: per_phase[t % tau], tau)


def directed_cycle_sequence(n: int) -> GraphSequence:
    """One arc of the directed cycle ``0 -> 1 -> ... -> 0`` per step; ``tau = n``."""
    adjs = [arcs_to_adj(n, [(a, (a + 1) % n)]) for a in range(n)]
    return GraphSequence(n, lambda t: adjs[t % n], n)


def patch_periodic(base: Callable[[int], np.ndarray], n: int, tau: int) -> GraphSequence:
    """Add a rotating arc of the cycle ``0 -> 1 -> ... -> 0`` on top of ``base``.

    Each window of ``tau`` steps receives ``ceil(n / tau)`` cycle arcs per
    step, so the union contains the full directed cycle and is strongly
    connected whatever ``base`` does.
    """
    per_step = -(-n // tau) if n > 1 else 0

    def fn(t: int) -> np.ndarray:
        adj = np.asarray(base(t), bool).copy()
        phase = (t - 1) % tau
        for r in range(per_step):
            a = phase * per_step + r
            if a < n:
                adj[a, (a + 1) % n] = True
        return adj

    return GraphSequence(n, fn, tau)


def random_sequence(n: int, tau: int, p: float, seed: int) -> GraphSequence:
    """Independent Bernoulli(p) arcs per step, patched to satisfy joint connectivity.

    Pure in ``(seed, t)``: the arcs at ``t`` do not depend on query order.
    """

    def base(t: int) -> np.ndarray:
        rng = np.random.default_rng([seed, t])
        adj = rng.random((n, n)) < p
        np.fill_diagonal(adj, False)
        return adj

    return patch_periodic(base, n, tau)
