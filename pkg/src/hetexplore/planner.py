"""Grid RRT path finding and open traveling-salesman tours."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .world import TRAVERSABLE_BELOW, OccupancyGrid


class NoPathError(RuntimeError):
    pass


@dataclass
class Path:
    waypoints: list
    resolution: float = 0.1

    @property
    def length(self) -> float:
        return path_length(self)

    def __add__(self, other: "Path") -> "Path":
        return Path(list(self.waypoints) + list(other.waypoints), self.resolution)


@dataclass
class RRTParams:
    step: float = 3.0
    max_iters: int = 5000
    goal_bias: float = 0.1
    seed: int = 0


@dataclass
class Tour:
    start: tuple
    order: list = field(default_factory=list)

    def length(self, metric=None) -> float:
        pts = [self.start] + list(self.order)
        d = metric or _euclid
        return sum(d(a, b) for a, b in zip(pts, pts[1:]))


def _euclid(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def path_length(path: Path) -> float:
    """Sum of straight segment lengths between consecutive waypoints (units)."""
    pts = path.waypoints
    return sum(_euclid(a, b) for a, b in zip(pts, pts[1:])) * path.resolution


def segment_free(free: np.ndarray, a, b, skip_start: bool = True) -> bool:
    """True when every sample of segment ``a -> b`` (spacing <= half a cell) is free."""
    n = max(1, int(math.ceil(2.0 * _euclid(a, b))))
    t = np.linspace(0.0, 1.0, n + 1)
    rr = np.rint(a[0] + (b[0] - a[0]) * t).astype(int)
    cc = np.rint(a[1] + (b[1] - a[1]) * t).astype(int)
    if skip_start:
        keep = (rr != a[0]) | (cc != a[1])
        rr, cc = rr[keep], cc[keep]
    if ((rr < 0) | (rr >= free.shape[0]) | (cc < 0) | (cc >= free.shape[1])).any():
        return False
    return bool(free[rr, cc].all())


def shortcut(free: np.ndarray, pts: list) -> list:
    """Greedy smoothing: from each kept waypoint jump to the farthest visible one."""
    if len(pts) <= 2:
        return list(pts)
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not segment_free(free, pts[i], pts[j]):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def rrt_path(grid: OccupancyGrid, start, goal, params: RRTParams | None = None) -> Path:
    """Collision-free path on cells below 50, smoothed by greedy shortcuts.

    The start cell may itself be uncertain (a robot standing in partly
    mapped space); the goal must be traversable.
    """
    params = params or RRTParams()
    start, goal = tuple(map(int, start)), tuple(map(int, goal))
    free = grid.values < TRAVERSABLE_BELOW
    if not grid.in_bounds(start) or not grid.in_bounds(goal):
        raise NoPathError("start or goal out of bounds")
    if not free[goal]:
        raise NoPathError(f"goal {goal} is not traversable")
    if start == goal:
        return Path([start], grid.resolution)
    if segment_free(free, start, goal):
        return Path([start, goal], grid.resolution)

    rng = np.random.default_rng(params.seed)
    free_cells = np.argwhere(free)
    nodes = np.array([start], float)
    parent = [-1]
    found = -1
    for _ in range(params.max_iters):
        if rng.random() < params.goal_bias:
            target = np.array(goal, float)
        else:
            target = free_cells[rng.integers(len(free_cells))].astype(float)
        near = int(np.argmin(np.sum((nodes - target) ** 2, axis=1)))
        base = nodes[near]
        vec = target - base
        dist = float(np.hypot(*vec))
        if dist == 0:
            continue
        new = np.rint(base + vec * min(1.0, params.step / dist))
        a, b = tuple(base.astype(int)), tuple(new.astype(int))
        if a == b or not segment_free(free, a, b):
            continue
        nodes = np.vstack([nodes, new])
        parent.append(near)
        if _euclid(b, goal) <= params.step and segment_free(free, b, goal):
            nodes = np.vstack([nodes, np.array(goal, float)])
            parent.append(len(nodes) - 2)
            found = len(nodes) - 1
            break
    if found < 0:
        raise NoPathError(f"no path from {start} to {goal} in {params.max_iters} iterations")
    chain = []
    k = found
    while k >= 0:
        chain.append(tuple(int(v) for v in nodes[k]))
        k = parent[k]
    chain.reverse()
    return Path(shortcut(free, chain), grid.resolution)


def _distance_matrix(pts, d) -> np.ndarray:
    n = len(pts)
    return np.array([[d(pts[i], pts[j]) for j in range(n)] for i in range(n)])


def nearest_neighbor_order(D: np.ndarray) -> list[int]:
    """Greedy open tour over indices of ``D`` starting at 0 (ties to lowest index)."""
    order = [0]
    left = list(range(1, len(D)))
    while left:
        last = order[-1]
        nxt = min(left, key=lambda j: (D[last, j], j))
        order.append(nxt)
        left.remove(nxt)
    return order


def two_opt(D: np.ndarray, order: list[int]) -> list[int]:
    """Segment reversals on an open tour until none shortens it; index 0 stays first."""
    order = list(order)
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            for j in range(i + 1, n):
                tail = j + 1 < n
                before = D[order[i - 1], order[i]] + (D[order[j], order[j + 1]] if tail else 0.0)
                after = D[order[i - 1], order[j]] + (D[order[i], order[j + 1]] if tail else 0.0)
                if after < before - 1e-12:
                    order[i:j + 1] = order[i:j + 1][::-1]
                    improved = True
    return order


def tsp_tour(start, targets, metric=None) -> Tour:
    """Open tour from ``start``: nearest-neighbour build then 2-opt.

    ``metric(a, b)`` defaults to Euclidean distance between cells.
    """
    targets = [tuple(t) for t in targets]
    if not targets:
        raise ValueError("need at least one target")
    pts = [tuple(start)] + targets
    D = _distance_matrix(pts, metric or _euclid)
    order = two_opt(D, nearest_neighbor_order(D))
    return Tour(tuple(start), [pts[k] for k in order[1:]])


def brute_force_tour(start, targets, metric=None) -> Tour:
    """Exhaustive optimum over all orderings (small inputs only)."""
    d = metric or _euclid
    best, best_len = None, math.inf
    for perm in itertools.permutations(targets):
        t = Tour(tuple(start), [tuple(p) for p in perm])
        L = t.length(d)
        if L < best_len - 1e-12:
            best, best_len = t, L
    return best
