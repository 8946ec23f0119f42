"""Occupancy-grid world: maps, noise, sensing, frontiers and frontier rewards.

Cells are addressed as ``(row, col)`` with row 0 at the top. Values live on
a 0-100 scale: 0 is free space, 100 an obstacle. Distances handed to or
returned by this module are in map units (cells times ``resolution``)
unless a name says otherwise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .behavioral_entropy import BehaviorParam, behavioral_entropy, LOG2

logger = logging.getLogger(__name__)

FREE, OCCUPIED = 0.0, 100.0
TRAVERSABLE_BELOW = 50.0
FRONTIER_BELOW = 2.0
UNCERTAIN_BAND = (2.0, 98.0)
NOISE_STEP = {1: 35.0, 2: 15.0}
# top-left, top-right, bottom-left, bottom-right
QUADRANT_NOISE = {"tl": 50.0, "tr": 80.0, "bl": 20.0, "br": 30.0}


class GridFormatError(ValueError):
    pass


class MapGenerationError(RuntimeError):
    pass


@dataclass
class OccupancyGrid:
    values: np.ndarray
    resolution: float = 0.1

    def __post_init__(self):
        self.values = np.array(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("grid values must be 2D")
        if np.any(~np.isfinite(self.values)) or self.values.min() < 0 or self.values.max() > 100:
            raise ValueError("grid values must lie in [0, 100]")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def diagonal(self) -> float:
        return math.hypot(self.height, self.width) * self.resolution

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.values.copy(), self.resolution)

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_ground_truth(self) -> bool:
        return bool(np.all((self.values == FREE) | (self.values == OCCUPIED)))

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.values, other.values)


@dataclass(frozen=True)
class SensorModel:
    radius: float
    noise_level: int = 0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("sensor radius must be positive")
        if self.noise_level not in (0, 1, 2):
            raise ValueError("noise level must be 0, 1 or 2")


@dataclass(frozen=True)
class Frontier:
    cell: tuple
    cluster_id: int
    representative: tuple


# ---------------------------------------------------------------- file format


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_grid_file(grid: OccupancyGrid, path) -> None:
    """Write ``OGRID <width> <height> <resolution>`` then one row per line."""
    lines = [f"OGRID {grid.width} {grid.height} {repr(float(grid.resolution))}"]
    for row in grid.values:
        lines.append(" ".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_grid_file(path) -> OccupancyGrid:
    text = Path(path).read_text().splitlines()
    if not text:
        raise GridFormatError("line 1: empty file")
    head = text[0].split()
    if len(head) != 4 or head[0] != "OGRID":
        raise GridFormatError("line 1: expected 'OGRID <width> <height> <resolution>'")
    try:
        width, height, res = int(head[1]), int(head[2]), float(head[3])
    except ValueError as exc:
        raise GridFormatError(f"line 1: bad header field ({exc})") from None
    if width < 1 or height < 1 or not res > 0:
        raise GridFormatError("line 1: width, height and resolution must be positive")
    body = [ln for ln in text[1:]]
    while body and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise GridFormatError(f"line {len(body) + 2}: expected {height} rows, found {len(body)}")
    vals = np.empty((height, width))
    for r, ln in enumerate(body):
        lineno = r + 2
        parts = ln.split()
        if len(parts) != width:
            raise GridFormatError(f"line {lineno}: expected {width} values, found {len(parts)}")
        for c, tok in enumerate(parts):
            try:
                v = float(tok)
            except ValueError:
                raise GridFormatError(f"line {lineno}: not a number: {tok!r}") from None
            if not 0.0 <= v <= 100.0:
                raise GridFormatError(f"line {lineno}: value {tok} outside [0, 100]")
            vals[r, c] = v
    return OccupancyGrid(vals, res)


# ---------------------------------------------------------------- map making


def free_space_connected(grid: OccupancyGrid) -> bool:
    free = grid.values < TRAVERSABLE_BELOW
    _, count = ndimage.label(free, structure=np.ones((3, 3)))
    return count == 1


def _walled(h: int, w: int) -> np.ndarray:
    v = np.zeros((h, w))
    v[0, :] = v[-1, :] = v[:, 0] = v[:, -1] = OCCUPIED
    return v


def _rooms(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    v = _walled(h, w)
    min_room, door = 6, 3

    def split(r0, r1, c0, c1):
        # interior rows r0..r1-1, cols c0..c1-1
        hh, ww = r1 - r0, c1 - c0
        horizontal = hh >= ww
        span = hh if horizontal else ww
        if span < 2 * min_room + 1:
            return
        cut = int(rng.integers(min_room, span - min_room)) + (r0 if horizontal else c0)
        if horizontal:
            v[cut, c0:c1] = OCCUPIED
            d = int(rng.integers(c0, c1 - door + 1))
            v[cut, d:d + door] = FREE
            split(r0, cut, c0, c1)
            split(cut + 1, r1, c0, c1)
        else:
            v[r0:r1, cut] = OCCUPIED
            d = int(rng.integers(r0, r1 - door + 1))
            v[d:d + door, cut] = FREE
            split(r0, r1, c0, cut)
            split(r0, r1, cut + 1, c1)

    split(1, h - 1, 1, w - 1)
    return v


def _corridors(h: int, w: int, rng: np.random.Generator) -> np.ndarray:
    v = np.full((h, w), OCCUPIED)
    width = 3
    n_nodes = max(4, (h * w) // 150)
    nodes = [
        (int(rng.integers(2, h - 2 - width)), int(rng.integers(2, w - 2 - width)))
        for _ in range(n_nodes)
    ]
    for (r0, c0), (r1, c1) in zip(nodes, nodes[1:]):
        # L-shaped corridor, horizontal leg first
        lo, hi = sorted((c0, c1))
        v[r0:r0 + width, lo:hi + width] = FREE
        lo, hi = sorted((r0, r1))
        v[lo:hi + width, c1:c1 + width] = FREE
    v[0, :] = v[-1, :] = v[:, 0] = v[:, -1] = OCCUPIED
    return v


def generate_map(kind: str, size=(40, 40), seed: int = 0, resolution: float = 0.1,
                 retries: int = 20) -> OccupancyGrid:
    """Synthetic ground-truth map: ``open``, ``rooms`` or ``corridors``.

    The border is always obstacle; free space is 8-connected.
    """
    h, w = (size, size) if np.isscalar(size) else size
    h, w = int(h), int(w)
    if h < 20 or w < 20:
        raise ValueError("maps must be at least 20x20")
    builders = {"open": lambda rng: _walled(h, w), "rooms": lambda rng: _rooms(h, w, rng),
                "corridors": lambda rng: _corridors(h, w, rng)}
    if kind not in builders:
        raise ValueError(f"unknown map kind {kind!r}")
    for attempt in range(retries):
        rng = np.random.default_rng([seed, attempt])
        grid = OccupancyGrid(builders[kind](rng), resolution)
        if free_space_connected(grid):
            return grid
        logger.debug("map %s seed %d attempt %d not connected", kind, seed, attempt)
    raise MapGenerationError(f"could not build a connected {kind} map after {retries} tries")


def quadrant_of(shape) -> np.ndarray:
    """Label array with entries 'tl', 'tr', 'bl', 'br'."""
    h, w = shape
    rows = np.arange(h)[:, None] < h / 2
    cols = np.arange(w)[None, :] < w / 2
    return np.where(rows, np.where(cols, "tl", "tr"), np.where(cols, "bl", "br"))


def add_quadrant_noise(truth: OccupancyGrid, seed: int, border: int = 2) -> OccupancyGrid:
    """Initial belief: per-quadrant uniform noise pushing cells toward 50.

    Free cells gain ``U[0, c]``, obstacles lose ``U[0, c]`` with ``c`` set by
    the quadrant. A band of ``border`` cells along the map edge stays exact.
    """
    rng = np.random.default_rng(seed)
    v = truth.values
    q = quadrant_of(v.shape)
    cap = np.vectorize(QUADRANT_NOISE.get)(q).astype(float)
    draw = rng.uniform(0.0, 1.0, v.shape) * cap
    direction = np.where(v >= TRAVERSABLE_BELOW, -1.0, 1.0)
    noisy = np.clip(v + direction * draw, 0.0, 100.0)
    edge = np.zeros(v.shape, bool)
    if border > 0:
        edge[:border, :] = edge[-border:, :] = True
        edge[:, :border] = edge[:, -border:] = True
    noisy[edge] = v[edge]
    return OccupancyGrid(noisy, truth.resolution)


# ---------------------------------------------------------------- sensing


@lru_cache(maxsize=64)
def _disk_offsets(radius_cells: float) -> np.ndarray:
    R = int(math.floor(radius_cells))
    dr, dc = np.mgrid[-R:R + 1, -R:R + 1]
    keep = dr * dr + dc * dc <= radius_cells * radius_cells + 1e-9
    return np.stack([dr[keep], dc[keep]], axis=1)


def disk_cells(shape, center, radius: float, resolution: float) -> tuple[np.ndarray, np.ndarray]:
    """Row/col index arrays of in-bounds cells within ``radius`` units of ``center``."""
    off = _disk_offsets(round(radius / resolution, 9))
    rows = off[:, 0] + center[0]
    cols = off[:, 1] + center[1]
    ok = (rows >= 0) & (rows < shape[0]) & (cols >= 0) & (cols < shape[1])
    return rows[ok], cols[ok]


def sense_update(grid: OccupancyGrid, truth: OccupancyGrid, center, sensor: SensorModel,
                 rng: np.random.Generator | None = None, inplace: bool = False) -> OccupancyGrid:
    """Map the disk of radius ``sensor.radius`` around ``center``.

    Noise level 0 copies the ground truth. Levels 1 and 2 move each cell
    toward the truth by an independent ``U[0, 35]`` or ``U[0, 15]`` step
    that stops at the truth.
    """
    if not grid.in_bounds(center):
        raise ValueError(f"center {center} out of bounds")
    out = grid if inplace else grid.copy()
    rows, cols = disk_cells(grid.values.shape, center, sensor.radius, grid.resolution)
    target = truth.values[rows, cols]
    if sensor.noise_level == 0:
        out.values[rows, cols] = target
        return out
    if rng is None:
        raise ValueError("noisy sensing needs an rng")
    cur = out.values[rows, cols]
    step = rng.uniform(0.0, NOISE_STEP[sensor.noise_level], size=cur.shape)
    gap = target - cur
    out.values[rows, cols] = cur + np.sign(gap) * np.minimum(step, np.abs(gap))
    return out


# ---------------------------------------------------------------- frontiers


_EIGHT = np.ones((3, 3), bool)


def frontier_mask(values: np.ndarray) -> np.ndarray:
    """Known-free cells (< 2) with an 8-neighbour strictly inside (2, 98)."""
    lo, hi = UNCERTAIN_BAND
    uncertain = (values > lo) & (values < hi)
    ring = _EIGHT.copy()
    ring[1, 1] = False
    touches = ndimage.binary_dilation(uncertain, structure=ring)
    return (values < FRONTIER_BELOW) & touches


def extract_frontiers(grid: OccupancyGrid) -> list[Frontier]:
    """Frontier cells grouped into 8-connected clusters.

    Each cluster's representative is the member closest to its centroid
    (lowest ``(row, col)`` on ties). Output is sorted by cell.
    """
    mask = frontier_mask(grid.values)
    labels, count = ndimage.label(mask, structure=_EIGHT)
    out = []
    for k in range(1, count + 1):
        rr, cc = np.nonzero(labels == k)
        cr, ccen = rr.mean(), cc.mean()
        d2 = (rr - cr) ** 2 + (cc - ccen) ** 2
        best = int(np.lexsort((cc, rr, d2))[0])
        rep = (int(rr[best]), int(cc[best]))
        out.extend(Frontier((int(r), int(c)), k - 1, rep) for r, c in zip(rr, cc))
    out.sort(key=lambda f: f.cell)
    return out


def cluster_representatives(frontiers) -> dict[int, tuple]:
    return {f.cluster_id: f.representative for f in frontiers}


def frontiers_in_radius(frontiers, pos, radius: float, diagonal: float,
                        resolution: float = 0.1) -> tuple[list, float]:
    """Frontiers within ``radius`` units of ``pos``, doubling the radius until
    something is found or the map diagonal is reached."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not frontiers:
        return [], diagonal
    cells = np.array([f.cell for f in frontiers], float)
    d = np.hypot(cells[:, 0] - pos[0], cells[:, 1] - pos[1]) * resolution
    r = radius
    while True:
        hit = d <= r + 1e-9
        if hit.any() or r >= diagonal:
            return [f for f, h in zip(frontiers, hit) if h], r
        r = min(2.0 * r, diagonal)


# ---------------------------------------------------------------- rewards


def info_gain(grid: OccupancyGrid, q, r: float, alpha: BehaviorParam | float) -> float:
    """Sum of BE over the cells within ``r`` units of ``q``."""
    if not grid.in_bounds(q):
        raise ValueError(f"cell {q} out of bounds")
    rows, cols = disk_cells(grid.values.shape, q, r, grid.resolution)
    return float(np.sum(behavioral_entropy(grid.values[rows, cols] / 100.0, alpha)))


def path_lengths(grid: OccupancyGrid, src) -> np.ndarray:
    """Shortest 8-connected path length (units) from ``src`` to every cell.

    Only cells below 50 are traversable; ``src`` itself is always allowed.
    Unreachable cells get ``inf``.
    """
    h, w = grid.values.shape
    ok = grid.values < TRAVERSABLE_BELOW
    ok[src] = True
    idx = np.arange(h * w).reshape(h, w)
    rows, cols, wts = [], [], []
    for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
        r0, r1 = slice(0, h - dr), slice(dr, h)
        c0, c1 = (slice(0, w - dc), slice(dc, w)) if dc >= 0 else (slice(-dc, w), slice(0, w + dc))
        a, b = idx[r0, c0], idx[r1, c1]
        both = ok[r0, c0] & ok[r1, c1]
        rows.append(a[both])
        cols.append(b[both])
        wts.append(np.full(both.sum(), math.hypot(dr, dc) * grid.resolution))
    rows, cols, wts = np.concatenate(rows), np.concatenate(cols), np.concatenate(wts)
    graph = coo_matrix((wts, (rows, cols)), shape=(h * w, h * w)).tocsr()
    dist = dijkstra(graph, directed=False, indices=int(idx[src]))
    return dist.reshape(h, w)


def distance_utility(grid: OccupancyGrid, x, q, lengths: np.ndarray | None = None) -> float:
    """``1 / eta`` with ``eta`` the traversable path length from ``x`` to ``q``.

    Falls back to the straight-line distance when no path exists yet; a
    co-located target counts as half a cell away.
    """
    if tuple(x) == tuple(q):
        return 1.0 / (0.5 * grid.resolution)
    lengths = path_lengths(grid, tuple(x)) if lengths is None else lengths
    eta = lengths[tuple(q)]
    if not np.isfinite(eta):
        eta = math.hypot(q[0] - x[0], q[1] - x[1]) * grid.resolution
    return 1.0 / eta


def reward_support(grid: OccupancyGrid, r: float) -> tuple[float, float]:
    """Bounds of any reward sample for footprint radius ``r``."""
    n = len(_disk_offsets(round(r / grid.resolution, 9)))
    return 0.0, n * LOG2 / (0.5 * grid.resolution)


def sample_rewards(grid: OccupancyGrid, q, r: float, alpha, x, rng: np.random.Generator,
                   count: int = 1, delta: float = 0.05, lengths: np.ndarray | None = None) -> np.ndarray:
    """``count`` stochastic samples of info gain times distance utility.

    Each sample perturbs every uncertain cell probability by ``U[-delta,
    delta]`` (clamped to [0, 1]); cells already at 0 or 1 stay put.
    """
    rows, cols = disk_cells(grid.values.shape, q, r, grid.resolution)
    p = grid.values[rows, cols] / 100.0
    p = p[(p > 0.0) & (p < 1.0)]
    phi = distance_utility(grid, x, q, lengths)
    if p.size == 0:
        return np.zeros(count)
    if delta > 0:
        noisy = np.clip(p[None, :] + rng.uniform(-delta, delta, (count, p.size)), 0.0, 1.0)
    else:
        noisy = np.broadcast_to(p, (count, p.size))
    gains = behavioral_entropy(np.ascontiguousarray(noisy), alpha).sum(axis=1)
    return gains * phi


def sample_rewards_batch(grid: OccupancyGrid, targets, r: float, alpha, x, rng: np.random.Generator,
                         count: int = 1, delta: float = 0.05, lengths: np.ndarray | None = None) -> np.ndarray:
    """:func:`sample_rewards` for many targets at once; shape ``(len(targets), count)``."""
    targets = [tuple(q) for q in targets]
    if not targets:
        return np.zeros((0, count))
    lengths = path_lengths(grid, tuple(x)) if lengths is None else lengths
    chunks, owner = [], []
    for k, q in enumerate(targets):
        rows, cols = disk_cells(grid.values.shape, q, r, grid.resolution)
        p = grid.values[rows, cols] / 100.0
        p = p[(p > 0.0) & (p < 1.0)]
        chunks.append(p)
        owner.append(np.full(p.size, k))
    p = np.concatenate(chunks)
    owner = np.concatenate(owner)
    phi = np.array([distance_utility(grid, x, q, lengths) for q in targets])
    if p.size == 0:
        return np.zeros((len(targets), count))
    if delta > 0:
        p = np.clip(p[None, :] + rng.uniform(-delta, delta, (count, p.size)), 0.0, 1.0)
    else:
        p = np.broadcast_to(p, (count, p.size))
    be = behavioral_entropy(np.ascontiguousarray(p), alpha)
    gains = np.zeros((len(targets), count))
    for c in range(count):
        gains[:, c] = np.bincount(owner, weights=be[c], minlength=len(targets))
    return gains * phi[:, None]


def sample_reward(grid, q, r, alpha, x, rng, delta: float = 0.05, lengths=None) -> float:
    return float(sample_rewards(grid, q, r, alpha, x, rng, 1, delta, lengths)[0])
