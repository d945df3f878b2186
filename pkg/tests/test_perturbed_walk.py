import math

import numpy as np
import pytest

from sievesim.perturbed_walk import (
    WalkPath,
    _assemble_walk,
    count_N,
    generate_walk,
    weighted_sum_statistic,
)
from sievesim.renewal_numerics import GridFunction, estimate_V
from sievesim.stable_paths import inverse_at_level
from sievesim.stats import ks_two_sample
from sievesim.streams import substream


class TestAssembly:
    def test_exact_stopping_rule(self):
        xis = np.array([1.0, 2.0, 5.0])
        etas = np.array([0.5, 4.0, 0.1])
        walk = _assemble_walk(xis, etas, horizon=6.0)
        # S = 0,1,3,8: stop at S_3 = 8 > 6; T = 0.5, 5.0, 3.1 all <= 6
        assert np.allclose(walk.s_values, [0.0, 1.0, 3.0, 8.0])
        assert np.allclose(np.sort(walk.t_values), [0.5, 3.1, 5.0])

    def test_points_beyond_horizon_filtered(self):
        walk = _assemble_walk(np.array([1.0, 9.0]), np.array([0.5, 3.0]), horizon=2.0)
        # T_2 = 1 + 3 = 4 > 2 is dropped even though S_1 <= 2
        assert np.allclose(walk.t_values, [0.5])

    def test_first_point_beyond_horizon(self):
        walk = _assemble_walk(np.array([5.0]), np.array([2.0]), horizon=1.0)
        assert walk.t_values.size == 0

    def test_insufficient_draws(self):
        assert _assemble_walk(np.array([1.0]), np.array([0.5]), horizon=10.0) is None


class TestGenerateWalk:
    def test_invariants(self, rng, case_a):
        for _ in range(200):
            walk = generate_walk(case_a, 50.0, rng)
            assert walk.s_values[0] == 0.0
            assert np.all(np.diff(walk.s_values) > 0)
            assert walk.s_values[-1] > 50.0
            assert np.all(walk.s_values[:-1] <= 50.0)
            assert np.all(walk.t_values <= 50.0)
            assert np.all(walk.t_values > 0)

    def test_horizon_validation(self, rng, case_a):
        with pytest.raises(ValueError):
            generate_walk(case_a, 0.0, rng)


class TestCountN:
    def test_boundaries(self):
        walk = WalkPath(horizon=10.0, s_values=np.array([0.0, 11.0]),
                        t_values=np.array([2.0, 5.0, 9.0]))
        assert count_N(walk, 1.0) == 0
        assert count_N(walk, 5.0) == 2
        assert count_N(walk, 10.0) == 3
        with pytest.raises(ValueError):
            count_N(walk, 10.5)

    def test_monotone_in_t(self, rng, case_a):
        walk = generate_walk(case_a, 100.0, rng)
        counts = [count_N(walk, t) for t in np.linspace(0, 100, 33)]
        assert all(a <= b for a, b in zip(counts, counts[1:]))

    def test_mean_matches_intensity_grid(self, case_a):
        # dual estimators of the same mean: walk counts vs the grid
        grid = estimate_V(case_a, 1000.0, 1000.0 / 4096, 20000, substream(1, 0))
        rng = substream(1, 1)
        n_rep = 10 ** 4
        counts = {t: np.empty(n_rep) for t in (10.0, 100.0, 1000.0)}
        for r in range(n_rep):
            walk = generate_walk(case_a, 1000.0, rng)
            for t in counts:
                counts[t][r] = count_N(walk, t)
        for t, vals in counts.items():
            se_mc = vals.std() / math.sqrt(n_rep)
            idx = int(round(t / grid.step))
            se = math.hypot(se_mc, grid.se[idx])
            assert abs(vals.mean() - grid.values[idx]) <= 4 * se, f"t={t}"

    def test_scaled_counts_match_inverse_marginals(self, case_a):
        # c (t/j)^-alpha N(y t/j) against inverse-subordinator draws; the
        # reference is sampled on the same value lattice c (t/j)^-alpha Z so
        # the comparison is not dominated by the count granularity
        t, j = 1e4, 10
        s = t / j
        rng = substream(2, 0)
        n_rep = 10 ** 4
        ys = (0.5, 1.0, 2.0)
        lattice = case_a.c * s ** -case_a.alpha
        scaled = {y: np.empty(n_rep) for y in ys}
        for r in range(n_rep):
            walk = generate_walk(case_a, 2.0 * s, rng)
            for y in ys:
                scaled[y][r] = lattice * count_N(walk, y * s)
        for y in ys:
            ref = inverse_at_level(case_a.alpha, y, n_rep, rng, v_step=lattice)
            assert ks_two_sample(scaled[y], ref) <= 0.05, f"y={y}"


class TestWeightedSum:
    def test_depth_zero_weights_reduce_to_count(self, rng, case_a):
        ones = GridFunction(step=1.0, values=np.ones(101))
        for _ in range(100):
            walk = generate_walk(case_a, 100.0, rng)
            stat = weighted_sum_statistic(walk, ones, 100.0)
            assert stat == count_N(walk, 100.0)

    def test_empty_walk(self):
        walk = WalkPath(horizon=5.0, s_values=np.array([0.0, 6.0]),
                        t_values=np.empty(0))
        ones = GridFunction(step=1.0, values=np.ones(6))
        assert weighted_sum_statistic(walk, ones, 5.0) == 0.0

    def test_grid_coverage_error(self, rng, case_a):
        walk = generate_walk(case_a, 100.0, rng)
        short = GridFunction(step=1.0, values=np.ones(11))
        with pytest.raises(ValueError, match="grid"):
            weighted_sum_statistic(walk, short, 100.0)

    def test_mean_matches_convolution_power(self, grids400, case_a):
        # E of the weighted sum with depth-4 weights equals the depth-5 power
        # on the grid: two independent estimators of the same quantity
        consts = grids400["consts"]
        v4 = grids400["powers"][3]
        v5 = grids400["powers"][4]
        t = 400.0
        rng = substream(3, 0)
        n_rep = 3000
        stats = np.empty(n_rep)
        for r in range(n_rep):
            walk = generate_walk(case_a, t, rng)
            stats[r] = weighted_sum_statistic(walk, v4, t)
        grid_pred = v5.values[-1]
        se_mc = stats.std() / math.sqrt(n_rep)
        # the grid prediction inherits roughly j-fold the relative SE of the
        # base grid; combine both error sources
        rel = 5.0 * grids400["v"].se[-1] / grids400["v"].values[-1]
        se = math.hypot(se_mc, rel * grid_pred)
        assert abs(stats.mean() - grid_pred) <= 4 * se
