import csv
import io
import math

import numpy as np
import pytest

from hetexplore.allocation import RewardTable
from hetexplore.sim import (
    EpisodeMetrics,
    SimConfig,
    cost_metric,
    min_reward_gap,
    perturb_rewards,
    perturbation,
    pwc_sample,
    run_episode,
    run_sweep,
    sweep_configs,
)

SMALL = SimConfig(seed=1, map_size=(20, 20), radius=0.3, noise=2)


def metrics(its, path, completed=True):
    return EpisodeMetrics(its, path, [path], [1.0, 0.0], completed, "threshold" if completed else "cap", [1.0])


def test_pwc_sample_splits_mass_at_one():
    draws = np.array(pwc_sample(0.3, 4.0, 100_000, 7))
    assert abs(np.mean(draws < 1.0) - 0.5) < 0.01
    assert draws.min() >= 0.3 and draws.max() <= 4.0
    # range not straddling 1 is uniform
    u = np.array(pwc_sample(2.0, 4.0, 100_000, 7))
    assert abs(np.mean(u < 3.0) - 0.5) < 0.01
    assert pwc_sample(1.5, 1.5, 3, 0) == [1.5, 1.5, 1.5]
    assert pwc_sample(0.3, 4.0, 5, 11) == pwc_sample(0.3, 4.0, 5, 11)
    with pytest.raises(ValueError):
        pwc_sample(0.0, 1.0, 1, 0)
    with pytest.raises(ValueError):
        pwc_sample(2.0, 1.0, 1, 0)


def test_perturbation_is_constant_and_small():
    a = perturbation(0, (3, 4), 1e-6, 5)
    assert a == perturbation(0, (3, 4), 1e-6, 5)
    assert 0 < a < 1e-6
    assert a != perturbation(1, (3, 4), 1e-6, 5)


def test_perturb_rewards_keeps_order_and_breaks_ties():
    table = RewardTable([0, 1, 2], [7, 9], {(0, 7): 0.5, (1, 7): 0.5, (2, 7): 0.7,
                                                 (0, 9): 0.2, (1, 9): 0.9})
    assert min_reward_gap(table) == pytest.approx(0.2)
    out = perturb_rewards(table, 1e-6, 0)
    assert out.rho[(0, 7)] != out.rho[(1, 7)]
    assert out.rho[(2, 7)] > max(out.rho[(0, 7)], out.rho[(1, 7)])
    assert out.rho[(1, 9)] > out.rho[(0, 9)]
    with pytest.raises(ValueError):
        perturb_rewards(table, 0.1, 0)
    with pytest.raises(ValueError):
        perturb_rewards(table, 0.0, 0)


def test_cost_metric_examples():
    costs, degenerate = cost_metric([metrics(10, 5.0), metrics(20, 5.0)])
    assert costs == [0.0, 1.0]
    assert degenerate  # path range collapsed
    costs, degenerate = cost_metric([metrics(10, 2.0), metrics(20, 6.0), metrics(15, 4.0)])
    assert costs == pytest.approx([0.0, 2.0, 1.0])
    assert not degenerate
    costs, degenerate = cost_metric([metrics(7, 3.0), metrics(7, 3.0)])
    assert costs == [0.0, 0.0] and degenerate
    costs, degenerate = cost_metric([metrics(7, 3.0)])
    assert costs == [0.0] and degenerate
    costs, _ = cost_metric([metrics(7, 3.0), metrics(9, 4.0), metrics(1, 1.0, completed=False)])
    assert costs[:2] == [0.0, 2.0] and math.isnan(costs[2])
    with pytest.raises(ValueError):
        cost_metric([])


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(seed=0, alpha_lo=2.0, alpha_hi=1.0)
    with pytest.raises(ValueError):
        SimConfig(seed=0, noise=3)
    with pytest.raises(ValueError):
        SimConfig(seed=0, threshold=0.0)


def test_fully_sensed_map_needs_no_iterations():
    m, grid = run_episode(SimConfig(seed=0, map_kind="open", map_size=(20, 20), radius=40.0))
    assert m.iterations_to_completion == 0
    assert m.completed and m.termination == "threshold"
    assert m.total_path_length == 0.0
    assert m.final_entropy == 0.0


def test_episode_is_deterministic_and_sane():
    m1, g1 = run_episode(SMALL)
    m2, g2 = run_episode(SMALL)
    assert m1 == m2
    assert np.array_equal(g1.values, g2.values)
    assert m1.completed and m1.iterations_to_completion > 0
    assert m1.final_entropy <= 0.01 * m1.initial_entropy
    assert len(m1.entropy_trace) == m1.iterations_to_completion + 2
    assert np.all(np.diff(m1.entropy_trace) <= 1e-9)
    assert m1.total_path_length == pytest.approx(sum(m1.robot_paths))
    assert all(rec.legal for rec in m1.allocations)
    assert len(m1.alphas) == SMALL.robots


def test_tick_cap_marks_incomplete():
    m, _ = run_episode(SimConfig(seed=1, map_size=(20, 20), radius=0.3, max_ticks=2))
    assert not m.completed and m.termination == "cap"
    assert m.iterations_to_completion == 2


def test_snapshots_are_emitted():
    ticks = []
    m, _ = run_episode(SMALL, snapshot_every=5, on_snapshot=lambda t, g: ticks.append(t))
    assert ticks == list(range(5, m.iterations_to_completion + 1, 5))


def test_sweep_design_shares_seeds_across_ranges():
    cfgs = sweep_configs(SMALL, [(0.3, 0.7), (2, 4)], [0.3], [0, 2], 3)
    assert len(cfgs) == 12
    assert [c.seed for c in cfgs[:3]] == [1, 2, 3]
    assert {c.seed for c in cfgs if c.alpha_lo == 2} == {1, 2, 3}


def test_sweep_rows_and_csv():
    args = (SimConfig(seed=3, map_size=(20, 20), radius=0.5), [(0.3, 0.7), (2, 4)], [0.5], [0], 3)
    rows, text = run_sweep(*args)
    assert len(rows) == 6
    assert run_sweep(*args)[1] == text
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert len(parsed) == 6
    assert [float(r["cost"]) for r in parsed] == pytest.approx([r["cost"] for r in rows])
    assert all(0.0 <= r["cost"] <= 2.0 for r in rows)
