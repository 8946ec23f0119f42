"""Full exploration episodes: sense, find frontiers, allocate, tour, travel.

One tick is one buffer-head traversal per robot. Whenever a robot's buffer
is empty at the start of a tick the whole team re-allocates from frozen
poses: frontier clusters become tasks, each robot scores the clusters it
can see with distributionally robust reward estimates, d-PBRAG runs on the
shared-frontier graph and every robot keeps up to ``buffer_cap`` of the
clusters it won, ordered by an open TSP tour.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .allocation import (
    IncompleteAssignmentError,
    RewardTable,
    StepSchedule,
    brute_force_partition,
    default_rounds,
    extract_assignment,
    run_dpbrag,
)
from .behavioral_entropy import BehaviorParam, total_map_entropy
from .dro import ConcentrationParams, dr_estimate_from_mean, epsilon_radius
from .network import arcs_to_adj, patch_periodic, shared_frontier_graph
from .planner import NoPathError, RRTParams, rrt_path, tsp_tour
from .world import (
    FREE,
    OccupancyGrid,
    SensorModel,
    add_quadrant_noise,
    extract_frontiers,
    frontiers_in_radius,
    generate_map,
    load_grid_file,
    path_lengths,
    reward_support,
    sample_rewards_batch,
    sense_update,
)

logger = logging.getLogger(__name__)

CSV_FIELDS = [
    "seed", "alpha_lo", "alpha_hi", "radius", "noise", "robots", "iterations",
    "completed", "total_path", "cost", "final_entropy", "initial_entropy",
]

# rng stream tags, one independent stream per concern
_MAP, _NOISE, _ALPHA, _START, _SENSE, _REWARD, _RRT, _PERTURB = range(8)


def pwc_sample(a: float, b: float, count: int, seed) -> list[float]:
    """Draw ``count`` alphas from the piecewise-constant density on ``[a, b]``.

    When 1 lies strictly inside the range, half the mass sits on ``[a, 1]``
    and half on ``[1, b]``; otherwise the draw is uniform.
    """
    if a <= 0:
        raise ValueError("alpha range must be positive")
    if b < a:
        raise ValueError("need a <= b")
    if a == b:
        return [float(a)] * count
    rng = np.random.default_rng(seed)
    u = rng.random(count)
    if not a < 1.0 < b:
        return (a + (b - a) * u).tolist()
    low = rng.random(count) < 0.5
    out = np.where(low, a + (1.0 - a) * u, 1.0 + (b - 1.0) * u)
    return out.tolist()


def _task_key(task) -> list[int]:
    if isinstance(task, (tuple, list)):
        return [int(v) for v in task]
    return [int(task)]


def perturbation(agent, task, scale: float, seed: int) -> float:
    """Constant offset in ``(0, scale)`` for one (agent, task) pair."""
    rng = np.random.default_rng([int(seed), int(agent), *_task_key(task)])
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return scale * u


def min_reward_gap(rewards: RewardTable) -> float:
    """Smallest positive gap between two rewards for the same task (``inf`` if none)."""
    gap = math.inf
    for q in rewards.tasks:
        vals = np.unique([rewards.rho[(i, q)] for i in rewards.holders(q)])
        if vals.size > 1:
            gap = min(gap, float(np.diff(vals).min()))
    return gap


def perturb_rewards(rewards: RewardTable, scale: float, seed: int) -> RewardTable:
    """Break ties with small constant offsets; refuses scales that could reorder rewards."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    gap = min_reward_gap(rewards)
    if scale >= 0.5 * gap:
        raise ValueError(f"scale {scale} is not below half the smallest reward gap {gap}")
    rho = {(i, q): v + perturbation(i, q, scale, seed) for (i, q), v in rewards.rho.items()}
    return RewardTable(rewards.agents, rewards.tasks, rho)


@dataclass
class RobotState:
    id: int
    pos: tuple
    alpha: BehaviorParam
    task_buffer: list = field(default_factory=list)
    frontier_radius: float = 0.0
    path_traveled: float = 0.0


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines an episode. Distances are in map units."""

    seed: int
    map_kind: str = "rooms"
    map_size: tuple = (40, 40)
    map_path: str | None = None
    robots: int = 3
    alpha_lo: float = 1.0
    alpha_hi: float = 1.0
    radius: float = 2.0
    noise: int = 0
    buffer_cap: int = 14
    threshold: float = 0.99
    max_ticks: int = 500
    T: int = 8
    tau: int = 1
    periods: int = 12
    sample_cap: int = 256
    reward_delta: float = 0.05
    theta: float = 0.1
    perturb_scale: float = 1e-6
    rrt_step: float = 3.0
    rrt_iters: int = 5000

    def __post_init__(self):
        if not 0 < self.alpha_lo <= self.alpha_hi:
            raise ValueError("need 0 < alpha_lo <= alpha_hi")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if self.robots < 1:
            raise ValueError("need at least one robot")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.noise not in (0, 1, 2):
            raise ValueError("noise must be 0, 1 or 2")
        if self.buffer_cap < 1 or self.max_ticks < 0:
            raise ValueError("buffer_cap must be >= 1 and max_ticks >= 0")


@dataclass
class AllocationRecord:
    tick: int
    tasks: int
    legal: bool
    oracle_match: bool
    fallback: bool


@dataclass
class EpisodeMetrics:
    iterations_to_completion: int
    total_path_length: float
    robot_paths: list
    entropy_trace: list
    completed: bool
    termination: str
    alphas: list
    allocations: list = field(default_factory=list)

    @property
    def initial_entropy(self) -> float:
        return self.entropy_trace[0]

    @property
    def final_entropy(self) -> float:
        return self.entropy_trace[-1]


def _rng(seed: int, tag: int, *extra) -> np.random.Generator:
    return np.random.default_rng([int(seed), tag, *[int(e) for e in extra]])


def build_world(config: SimConfig) -> tuple[OccupancyGrid, OccupancyGrid]:
    """Ground truth and the noisy prior belief."""
    if config.map_path:
        truth = load_grid_file(config.map_path)
    else:
        truth = generate_map(config.map_kind, tuple(config.map_size), seed=config.seed)
    belief = add_quadrant_noise(truth, seed=int(_rng(config.seed, _NOISE).integers(2**32)))
    return truth, belief


def start_cells(truth: OccupancyGrid, count: int, seed: int) -> list[tuple]:
    free = np.argwhere(truth.values == FREE)
    if len(free) < count:
        raise ValueError("not enough free cells for the robots")
    pick = _rng(seed, _START).choice(len(free), count, replace=False)
    return [tuple(int(v) for v in free[k]) for k in pick]


def legal_partition(owners: dict, visible: dict) -> bool:
    """Every task owned by exactly one robot among those that see it."""
    return all(len(o) == 1 and o[0] in visible[q] for q, o in owners.items())


class Episode:
    """Mutable episode state; :func:`run_episode` drives it to completion."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.truth, self.grid = build_world(config)
        self.sensor = SensorModel(config.radius, config.noise)
        self.sense_rng = _rng(config.seed, _SENSE)
        alphas = pwc_sample(config.alpha_lo, config.alpha_hi, config.robots,
                            _rng(config.seed, _ALPHA).integers(2**32))
        self.robots = [
            RobotState(i, pos, BehaviorParam.from_alpha(a), frontier_radius=10.0 * config.radius)
            for i, (pos, a) in enumerate(zip(start_cells(self.truth, config.robots, config.seed), alphas))
        ]
        self.schedule = StepSchedule(T=config.T, tau=config.tau)
        self.allocations: list[AllocationRecord] = []
        self.tick = 0

    # -- mapping

    def sense(self, cell) -> None:
        rng = self.sense_rng if self.config.noise else None
        sense_update(self.grid, self.truth, cell, self.sensor, rng, inplace=True)

    def entropy(self) -> float:
        return total_map_entropy(self.grid)

    # -- allocation

    def _visible(self, frontiers) -> dict:
        reps = sorted({f.representative for f in frontiers})
        visible = {q: [] for q in reps}
        for r in self.robots:
            seen, radius = frontiers_in_radius(frontiers, r.pos, 10.0 * self.config.radius,
                                               self.grid.diagonal, self.grid.resolution)
            r.frontier_radius = radius
            for q in sorted({f.representative for f in seen}):
                visible[q].append(r.id)
        return {q: v for q, v in visible.items() if v}

    def _estimates(self, visible: dict, tasks: list):
        """Callable ``t -> estimate matrix``, refreshed with new samples at each injection.

        Every (robot, task) stream holds one draw per elapsed round (at
        least one, at most ``sample_cap``); the injected value is the DR
        midpoint for that sample count, scaled so the largest entry is 1,
        plus the constant tie-breaking offset.
        """
        cfg = self.config
        n, m = len(self.robots), len(tasks)
        lo, hi = reward_support(self.grid, cfg.radius)
        params = ConcentrationParams(theta=cfg.theta)
        rng = _rng(cfg.seed, _REWARD, self.tick)
        seen = [[k for k, q in enumerate(tasks) if a in visible[q]] for a in range(n)]
        lengths = {a: path_lengths(self.grid, self.robots[a].pos) for a in range(n) if seen[a]}
        offsets = np.zeros((n, m))
        for a in range(n):
            for k in seen[a]:
                offsets[a, k] = perturbation(a, tasks[k], cfg.perturb_scale, cfg.seed)
        sums = np.zeros((n, m))
        count = 0
        cache: dict[int, np.ndarray] = {}

        def estimates(t: int) -> np.ndarray:
            nonlocal count
            period = t // cfg.T
            while len(cache) <= period:
                want = min(max(1, len(cache) * cfg.T), cfg.sample_cap)
                fresh = want - count
                for a in range(n):
                    if seen[a] and fresh > 0:
                        robot = self.robots[a]
                        draws = sample_rewards_batch(
                            self.grid, [tasks[k] for k in seen[a]], cfg.radius, robot.alpha, robot.pos,
                            rng, fresh, cfg.reward_delta, lengths[a])
                        sums[a, seen[a]] += np.clip(draws, lo, hi).sum(axis=1)
                count = want
                z = dr_estimate_from_mean(sums / count, epsilon_radius(count, params), lo, hi)
                z[offsets == 0] = 0.0
                top = z.max()
                if top > 0:
                    z = z / top
                cache[len(cache)] = z + offsets
            return cache[period]

        return estimates

    def reallocate(self, frontiers) -> None:
        cfg = self.config
        visible = self._visible(frontiers)
        tasks = sorted(visible)
        for r in self.robots:
            r.task_buffer = []
        if not tasks:
            return
        n = len(self.robots)
        mask = np.zeros((n, len(tasks)), bool)
        for k, q in enumerate(tasks):
            mask[visible[q], k] = True
        estimates = self._estimates(visible, tasks)
        rounds = default_rounds(self.schedule, cfg.periods)
        groups = [set(visible[q]) for q in tasks]
        base = arcs_to_adj(n, shared_frontier_graph([{k for k, g in enumerate(groups) if a in g}
                                                     for a in range(n)]))
        graphs = patch_periodic(lambda t: base, n, cfg.tau)
        first = RewardTable.from_matrix(estimates(0), list(range(n)), tasks, mask)
        state = run_dpbrag(first, graphs, self.schedule, rounds, estimates=estimates)
        final = estimates(rounds)
        table = RewardTable.from_matrix(final, list(range(n)), tasks, mask)
        oracle = brute_force_partition(table)
        fallback = False
        try:
            part = extract_assignment(state)
        except IncompleteAssignmentError as exc:
            logger.warning("tick %d: orphaned tasks %s, using the oracle partition", self.tick, exc.orphans)
            part, fallback = oracle, True
        owners = {q: [a for a, qs in part.assignment.items() if q in qs] for q in tasks}
        self.allocations.append(AllocationRecord(
            self.tick, len(tasks), legal_partition(owners, visible), part == oracle, fallback))
        for r in self.robots:
            owned = sorted(part.assignment.get(r.id, ()), key=lambda q: (-final[r.id, tasks.index(q)], q))
            owned = owned[:cfg.buffer_cap]
            if owned:
                r.task_buffer = list(tsp_tour(r.pos, owned).order)

    # -- motion

    def travel(self, robot: RobotState) -> None:
        goal = robot.task_buffer.pop(0)
        params = RRTParams(self.config.rrt_step, self.config.rrt_iters,
                           seed=int(_rng(self.config.seed, _RRT, self.tick, robot.id).integers(2**32)))
        try:
            path = rrt_path(self.grid, robot.pos, goal, params)
        except NoPathError as exc:
            logger.info("robot %d skips %s: %s", robot.id, goal, exc)
            return
        step = max(1.0, 0.5 * self.config.radius / self.grid.resolution)
        pts = path.waypoints
        if len(pts) == 1:
            self.sense(pts[0])
        for a, b in zip(pts, pts[1:]):
            n = max(1, math.ceil(math.hypot(b[0] - a[0], b[1] - a[1]) / step))
            for s in range(1, n + 1):
                cell = (round(a[0] + (b[0] - a[0]) * s / n), round(a[1] + (b[1] - a[1]) * s / n))
                self.sense(cell)
        robot.path_traveled += path.length
        robot.pos = tuple(pts[-1])


def run_episode(config: SimConfig, snapshot_every: int | None = None, on_snapshot=None):
    """Run one episode; returns ``(EpisodeMetrics, final belief grid)``.

    ``on_snapshot(tick, grid)`` is called every ``snapshot_every`` ticks.
    """
    ep = Episode(config)
    trace = [ep.entropy()]
    for r in ep.robots:
        ep.sense(r.pos)
    trace.append(ep.entropy())
    target = (1.0 - config.threshold) * trace[0]
    termination = "cap"
    while True:
        if trace[-1] <= target:
            termination = "threshold"
            break
        frontiers = extract_frontiers(ep.grid)
        if not frontiers:
            termination = "no_frontiers"
            break
        if ep.tick >= config.max_ticks:
            break
        live = {f.representative for f in frontiers}
        for r in ep.robots:
            r.task_buffer = [q for q in r.task_buffer if q in live]
        if any(not r.task_buffer for r in ep.robots):
            ep.reallocate(frontiers)
        ep.tick += 1
        for r in ep.robots:
            if r.task_buffer:
                ep.travel(r)
        trace.append(ep.entropy())
        if snapshot_every and on_snapshot and ep.tick % snapshot_every == 0:
            on_snapshot(ep.tick, ep.grid)
    paths = [r.path_traveled for r in ep.robots]
    metrics = EpisodeMetrics(ep.tick, float(sum(paths)), paths, trace, termination != "cap",
                             termination, [r.alpha.alpha for r in ep.robots], ep.allocations)
    return metrics, ep.grid


def cost_metric(batch: list) -> tuple[list, bool]:
    """Min-max normalized iterations plus path length for each episode.

    Incomplete episodes get ``nan``. The flag is True when fewer than two
    completed episodes remain or a range collapses (normalization set to 0).
    """
    if not batch:
        raise ValueError("empty batch")
    done = [m for m in batch if m.completed]
    degenerate = len(done) < 2
    if not done:
        return [math.nan] * len(batch), True
    its = np.array([m.iterations_to_completion for m in done], float)
    pth = np.array([m.total_path_length for m in done], float)

    def norm(v):
        span = v.max() - v.min()
        return (v - v.min()) / span if span > 0 else np.zeros_like(v)

    if np.ptp(its) == 0 or np.ptp(pth) == 0:
        degenerate = True
    costs = iter((norm(its) + norm(pth)).tolist())
    return [next(costs) if m.completed else math.nan for m in batch], degenerate


def sweep_configs(base: SimConfig, alpha_ranges, radii, noise_levels, trials: int) -> list[SimConfig]:
    """Full factorial in (range, radius, noise, trial) order.

    Trial ``k`` uses seed ``base.seed + k`` in every cell of the design, so
    all ranges face the same maps and starts.
    """
    return [
        replace(base, seed=base.seed + k, alpha_lo=float(lo), alpha_hi=float(hi),
                radius=float(r), noise=int(s))
        for lo, hi in alpha_ranges
        for r in radii
        for s in noise_levels
        for k in range(trials)
    ]


def _metrics_only(config: SimConfig) -> EpisodeMetrics:
    return run_episode(config)[0]


def run_sweep(base: SimConfig, alpha_ranges, radii, noise_levels, trials: int, jobs: int = 1):
    """Run the design and return ``(rows, csv_text)``; cost is normalized per (radius, noise)."""
    configs = sweep_configs(base, alpha_ranges, radii, noise_levels, trials)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_metrics_only, configs))
    else:
        results = [_metrics_only(c) for c in configs]
    costs = [math.nan] * len(configs)
    groups: dict[tuple, list[int]] = {}
    for k, c in enumerate(configs):
        groups.setdefault((c.radius, c.noise), []).append(k)
    for idx in groups.values():
        for k, v in zip(idx, cost_metric([results[k] for k in idx])[0]):
            costs[k] = v
    rows = [
        {
            "seed": c.seed, "alpha_lo": c.alpha_lo, "alpha_hi": c.alpha_hi, "radius": c.radius,
            "noise": c.noise, "robots": c.robots, "iterations": m.iterations_to_completion,
            "completed": int(m.completed), "total_path": m.total_path_length, "cost": cost,
            "final_entropy": m.final_entropy, "initial_entropy": m.initial_entropy,
        }
        for c, m, cost in zip(configs, results, costs)
    ]
    return rows, rows_to_csv(rows)


def _cell(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for row in rows:
        w.writerow([_cell(row[k]) for k in CSV_FIELDS])
    return buf.getvalue()
