"""Seeded certificate suites behind ``hetexplore check``.

Each function runs a fixed, deterministic experiment and returns a
:class:`CheckResult` counting passing cases against a required pass count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.stats import truncnorm

from . import network as nw
from .abstract_model import AbstractWorld, AgentConfig, run_abstract, team_pbar
from .allocation import (
    IncompleteAssignmentError,
    StepSchedule,
    brute_force_partition,
    consensus_step,
    extract_assignment,
    mu_band_limit,
    random_instance,
    run_dpbrag,
    submax,
)
from .behavioral_entropy import LOG2, behavioral_entropy, shannon_entropy
from .dro import (
    ConcentrationParams,
    EmpiricalDistribution,
    epsilon_radius,
    inf_mean_ball,
    sup_mean_ball,
)


@dataclass
class CheckResult:
    name: str
    passed: int
    total: int
    required: int
    failures: list = field(default_factory=list)
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.passed >= self.required

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"{status} {self.name}: {self.passed}/{self.total}, need {self.required}{extra}"


# ---------------------------------------------------------------- entropy

ENTROPY_ALPHAS = (0.1, 0.5, 1.0, 2.0, 4.0, 8.0)


def check_entropy() -> list[CheckResult]:
    p = np.linspace(0.0, 1.0, 10_000)
    gap = float(np.max(np.abs(behavioral_entropy(p, 1.0) - shannon_entropy(p))))
    shannon = CheckResult("entropy/shannon-limit", int(gap <= 1e-12), 1, 1,
                          [] if gap <= 1e-12 else [gap], f"max gap {gap:.3g}")
    bad = [a for a in ENTROPY_ALPHAS if abs(behavioral_entropy(0.5, a) - LOG2) > 1e-9]
    peak = CheckResult("entropy/half-is-log2", len(ENTROPY_ALPHAS) - len(bad),
                       len(ENTROPY_ALPHAS), len(ENTROPY_ALPHAS), bad)
    return [shannon, peak]


# ---------------------------------------------------------------- allocation


def _allocation_instance(seed: int):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    m = int(rng.integers(1, 7))
    tau = int(rng.integers(1, 3))
    rewards = random_instance(rng, n, m)
    seq = nw.complete_sequence(n, tau) if seed % 2 == 0 else nw.ring_sequence(n, tau)
    return rng, rewards, seq, StepSchedule(T=8, tau=tau)


def check_allocation_exact(instances: int = 200) -> CheckResult:
    fails = []
    for s in range(instances):
        _, rewards, seq, sch = _allocation_instance(s)
        try:
            got = extract_assignment(run_dpbrag(rewards, seq, sch))
        except IncompleteAssignmentError:
            got = None
        if got != brute_force_partition(rewards):
            fails.append(s)
    return CheckResult("allocation/exact", instances - len(fails), instances, instances, fails)


def check_allocation_noisy(instances: int = 200, band: float = 0.9, required_rate: float = 0.95) -> CheckResult:
    """Estimates are rewards plus fresh ``U[-band*mu_q, band*mu_q]`` noise at every step."""
    fails = []
    for s in range(instances):
        rng, rewards, seq, sch = _allocation_instance(s)
        mat, _ = rewards.matrix()
        mu = np.array([band * mu_band_limit(rewards, q) for q in rewards.tasks])

        def est(_t, rng=rng, mat=mat, mu=mu):
            return mat + rng.uniform(-1.0, 1.0, mat.shape) * mu[None, :]

        try:
            got = extract_assignment(run_dpbrag(rewards, seq, sch, estimates=est))
        except IncompleteAssignmentError:
            got = None
        if got != brute_force_partition(rewards):
            fails.append(s)
    return CheckResult("allocation/noisy-band", instances - len(fails), instances,
                       math.ceil(required_rate * instances), fails)


def consensus_sequences():
    """Graph sequences satisfying joint strong connectivity, with labels."""
    out = []
    for n in (2, 3, 4, 5, 6, 8):
        for tau in (1, 2, 3):
            out.append((f"ring n={n} tau={tau}", nw.ring_sequence(n, tau)))
            out.append((f"random n={n} tau={tau}", nw.random_sequence(n, tau, 0.1, seed=5)))
            out.append((f"cycle-only n={n} tau={tau}",
                        nw.patch_periodic(lambda t, n=n: np.zeros((n, n), bool), n, tau)))
        out.append((f"directed-cycle n={n}", nw.directed_cycle_sequence(n)))
    return out


def consensus_violations(seq: nw.GraphSequence, T: int, periods: int, rng: np.random.Generator,
                         tasks: int = 2, pool: str = "top2") -> int:
    """Steps at least ``diam * tau`` after an injection where some register is stale."""
    n = seq.n
    horizon = T * periods
    reach = nw.max_window_diameter(seq, horizon) * seq.tau
    mask = np.ones((n, tasks), bool)
    z = rng.random((n, tasks))
    if n > 1:
        z[0, -1] = z[1, -1]
    M, S, e = z.copy(), z.copy(), z.copy()
    bad = 0
    for t in range(horizon):
        injected = (t + 1) % T == 0
        z_next = rng.random((n, tasks)) if injected else z
        M, S, e = consensus_step(M, S, e, seq.adjacency(t + 1), z_next, t + 1, T, mask, pool)
        if injected:
            z = z_next
        if (t + 1) % T < reach:
            continue
        for q in range(tasks):
            if not (np.all(M[:, q] == z[:, q].max()) and np.all(S[:, q] == submax(z[:, q]))):
                bad += 1
                break
    return bad


def check_consensus() -> CheckResult:
    rng = np.random.default_rng(0)
    fails = []
    seqs = consensus_sequences()
    for label, seq in seqs:
        T = max(8, 3 * seq.tau * seq.n)
        v = consensus_violations(seq, T, 20, rng)
        if v:
            fails.append((label, v))
    return CheckResult("allocation/consensus", len(seqs) - len(fails), len(seqs), len(seqs), fails)


# ---------------------------------------------------------------- dro


def lp_sup_mean(atoms, eps: float, grid: np.ndarray, maximize: bool = True) -> float:
    """Extreme mean over distributions on ``grid`` within W1 ``eps`` of the atoms (transport LP)."""
    atoms = np.asarray(atoms, float)
    N, K = atoms.size, grid.size
    cost = np.abs(atoms[:, None] - grid[None, :]).ravel()
    c = np.tile(grid, N) * (-1.0 if maximize else 1.0)
    A_eq = np.kron(np.eye(N), np.ones((1, K)))
    res = linprog(c, A_ub=cost[None, :], b_ub=[eps], A_eq=A_eq, b_eq=np.full(N, 1.0 / N),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(-res.fun if maximize else res.fun)


def check_dro_coverage(sizes=(10, 50, 200), trials: int = 1000, theta: float = 0.1,
                       required_rate: float = 0.9) -> list[CheckResult]:
    params = ConcentrationParams(theta=theta)
    out = []
    for N in sizes:
        rng = np.random.default_rng(N)
        eps = epsilon_radius(N, params)
        hit = 0
        for _ in range(trials):
            loc, scale = rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.4)
            dist = truncnorm((0.0 - loc) / scale, (1.0 - loc) / scale, loc=loc, scale=scale)
            emp = EmpiricalDistribution(dist.rvs(N, random_state=rng), 0.0, 1.0)
            hit += inf_mean_ball(emp, eps) <= dist.mean() <= sup_mean_ball(emp, eps)
        out.append(CheckResult(f"dro/coverage N={N}", hit, trials, math.ceil(required_rate * trials),
                               detail=f"eps={eps:.4f}"))
    return out


def check_dro_closed_form(instances: int = 50, points: int = 201) -> CheckResult:
    grid = np.linspace(0.0, 1.0, points)
    res = grid[1] - grid[0]
    rng = np.random.default_rng(7)
    fails = []
    for k in range(instances):
        atoms = rng.random(int(rng.integers(2, 8)))
        eps = float(rng.uniform(0.0, 0.6))
        emp = EmpiricalDistribution(atoms, 0.0, 1.0)
        up = abs(sup_mean_ball(emp, eps) - lp_sup_mean(atoms, eps, grid, True))
        down = abs(inf_mean_ball(emp, eps) - lp_sup_mean(atoms, eps, grid, False))
        if max(up, down) > res:
            fails.append((k, up, down))
    return CheckResult("dro/closed-form-vs-lp", instances - len(fails), instances, instances, fails)


# ---------------------------------------------------------------- abstract model

LEMMA_LAMBDAS = (0.0, 0.3, 0.7)
PROP_ALPHAS = (0.5, 1.0, 2.0, 4.0)


def lemma_world(seed: int, lam: float) -> tuple[AbstractWorld, AgentConfig]:
    """Random planar cells with beliefs on the correct side of 1/2."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 31))
    m = int(rng.integers(2, 5))
    pts = rng.random((n, 2))
    eta = np.linalg.norm(pts[:, None] - pts[None], axis=-1) + 0.1
    np.fill_diagonal(eta, 0.0)
    truth = rng.integers(0, 2, n).astype(float)
    p = np.where(truth == 1, rng.uniform(0.51, 0.99, n), rng.uniform(0.01, 0.49, n))
    agents = AgentConfig(list(rng.uniform(0.3, 3.0, m)), list(rng.choice(n, m, replace=False)))
    return AbstractWorld(eta, p, truth, lam), agents


def check_lemma(seeds: int = 50, steps: int = 200) -> CheckResult:
    fails, total, bad = [], 0, 0
    for lam in LEMMA_LAMBDAS:
        for s in range(seeds):
            world, agents = lemma_world(s, lam)
            tr = run_abstract(world, agents, steps)
            total += len(tr.records)
            for r in tr.records:
                if not (r.lemma_ok and r.bound_negative):
                    bad += 1
                    if len(fails) < 20:
                        fails.append((lam, s, r.step, r.delta, r.bound))
    return CheckResult("lemma/entropy-bound", total - bad, total, total, fails)


def prop_world(seed: int, distinct: bool = True) -> tuple[AbstractWorld, AgentConfig, float]:
    """Prop. instance: distinct alphas and beliefs outside ``[p_bar, 1 - p_bar]``.

    The control (``distinct=False``) gives every agent alpha 1 on uniform
    path lengths, where the belief band is the whole interval.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 31))
    m = int(rng.integers(2, 5))
    if distinct:
        alphas = sorted(rng.choice(PROP_ALPHAS, m, replace=False).tolist())
        eta = np.triu(rng.uniform(1.0, 1.2, (n, n)), 1)
        eta = eta + eta.T
    else:
        alphas = [1.0] * m
        eta = np.ones((n, n)) - np.eye(n)
    probe = AbstractWorld(eta, np.full(n, 0.1), np.zeros(n))
    pbar = team_pbar(alphas, *probe.distance_ratios()) if distinct else 0.5
    truth = rng.integers(0, 2, n).astype(float)
    off = rng.uniform(0.001, 1.0, n) * pbar * 0.999
    p = np.where(truth == 1, 1.0 - off, off)
    world = AbstractWorld(eta, p, truth, lam=float(rng.choice(LEMMA_LAMBDAS)))
    return world, AgentConfig(alphas, rng.choice(n, m, replace=False).tolist()), pbar


def check_prop(seeds: int = 50, steps: int = 200) -> list[CheckResult]:
    fails, collisions, control, total = [], 0, 0, 0
    for s in range(seeds):
        world, agents, _ = prop_world(s)
        tr = run_abstract(world, agents, steps)
        total += len(tr.records)
        collisions += tr.raw_collisions
        if tr.distinct_violations:
            fails.append((s, tr.distinct_violations))
        world, agents, _ = prop_world(s, distinct=False)
        control += run_abstract(world, agents, steps).raw_collisions
    bad = sum(v for _, v in fails)
    return [
        CheckResult("prop/distinct-positions", total - bad, total, total, fails,
                    f"{collisions} raw-target collisions resolved"),
        CheckResult("prop/control-collides", int(control >= 1), 1, 1, detail=f"{control} raw collisions"),
    ]


SUITES = {
    "entropy": lambda: check_entropy(),
    "allocation": lambda: [check_allocation_exact(), check_allocation_noisy(), check_consensus()],
    "dro": lambda: check_dro_coverage() + [check_dro_closed_form()],
    "lemma": lambda: [check_lemma()],
    "prop": lambda: check_prop(),
}


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
