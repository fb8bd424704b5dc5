"""Kernel quadrature: embeddings, MMD assembly, the continuous LMO, runs."""

import math

import numpy as np
import pytest

from condgrad import (
    ConfigurationError,
    DiscreteMeasure,
    EmbeddingCache,
    Gaussian,
    GaussianMixture,
    Matern32,
    SolverConfig,
    TruncatedGaussian,
    UniformBox,
    embedding_constant,
    herding_lmo,
    mean_embedding,
    mmd_squared,
    run_bpcg_herding,
    run_lazy_bpcg_herding,
    run_monte_carlo,
    run_sbq,
    run_vanilla_herding,
    verify_trace_invariants,
)
from condgrad.bench.experiments import mmd_by_node_count
from condgrad.herding import CandidatePool, get_embedding_cache

HERDING_D = math.sqrt(2.0)


def dirac(point):
    return DiscreteMeasure(np.atleast_2d(point), np.array([1.0]))


class TestMeanEmbedding:
    def test_uniform_gaussian_at_origin(self, gauss_uniform_1d):
        kernel, measure, cache, _ = gauss_uniform_1d
        # half the Gauss integral over [-1, 1], from a 256-point rule
        x256, w256 = np.polynomial.legendre.leggauss(256)
        expected = 0.5 * float(w256 @ np.exp(-(x256**2)))
        z0 = mean_embedding(kernel, measure, np.array([0.0]), cache=cache)
        assert z0 == pytest.approx(expected, abs=1e-12)
        assert z0 == pytest.approx(0.746824, abs=1e-6)

    def test_embedding_constant_uniform_gaussian(self, gauss_uniform_1d):
        kernel, measure, cache, _ = gauss_uniform_1d
        # independent double-integral oracle on a 256^2 tensor rule
        x256, w256 = np.polynomial.legendre.leggauss(256)
        diff = x256[:, None] - x256[None, :]
        expected = float(w256 @ np.exp(-(diff**2)) @ w256) / 4.0
        c = embedding_constant(kernel, measure, cache=cache)
        assert c == pytest.approx(expected, abs=1e-12)
        assert c == pytest.approx(0.6366603, abs=1e-6)

    def test_embedding_bounded_by_one(self, rng):
        for kernel in (Gaussian(), Matern32()):
            for measure in (UniformBox(2), TruncatedGaussian(2)):
                cache = get_embedding_cache(kernel, measure)
                pts = rng.uniform(-1, 1, size=(50, 2))
                z = cache.z(pts)
                assert np.all(z >= 0.0) and np.all(z <= 1.0 + 1e-12)

    def test_constant_in_unit_interval(self):
        for kernel in (Gaussian(), Matern32()):
            for measure in (UniformBox(2), GaussianMixture(2)):
                c = embedding_constant(kernel, measure)
                assert 0.0 <= c <= 1.0

    def test_dimension_cap(self):
        with pytest.raises(ConfigurationError):
            EmbeddingCache(Gaussian(), UniformBox(4))

    def test_refinement_agreement(self, gauss_uniform_1d, rng):
        kernel, measure, cache, _ = gauss_uniform_1d
        fine = EmbeddingCache(kernel, measure, order=128)
        pts = rng.uniform(-1, 1, size=(20, 1))
        np.testing.assert_allclose(cache.z(pts), fine.z(pts), rtol=1e-8)
        assert cache.c_mu == pytest.approx(fine.c_mu, rel=1e-8)

    def test_refinement_agreement_2d(self, matern32_uniform_2d, rng):
        kernel, measure, cache, _ = matern32_uniform_2d
        fine = EmbeddingCache(kernel, measure, order=128)
        pts = rng.uniform(-1, 1, size=(10, 2))
        np.testing.assert_allclose(cache.z(pts), fine.z(pts), rtol=1e-8)
        assert cache.c_mu == pytest.approx(fine.c_mu, rel=1e-8)


class TestMmdSquared:
    def test_single_dirac_value(self, gauss_uniform_1d):
        kernel, measure, cache, _ = gauss_uniform_1d
        val = mmd_squared(kernel, measure, dirac([0.0]), cache=cache)
        assert val == pytest.approx(0.14301203, abs=1e-7)

    def test_duplicate_nodes_merge_bilinearly(self, gauss_uniform_1d):
        kernel, measure, cache, _ = gauss_uniform_1d
        split = DiscreteMeasure(np.array([[0.3], [0.3]]), np.array([0.5, 0.5]))
        merged = dirac([0.3])
        a = mmd_squared(kernel, measure, split, cache=cache)
        b = mmd_squared(kernel, measure, merged, cache=cache)
        assert a == pytest.approx(b, abs=1e-14)

    def test_nonnegative(self, gauss_uniform_1d, rng):
        kernel, measure, cache, _ = gauss_uniform_1d
        for _ in range(30):
            m = int(rng.integers(1, 9))
            nodes = rng.uniform(-1, 1, size=(m, 1))
            w = rng.random(m) + 0.01
            xi = DiscreteMeasure(nodes, w / w.sum())
            assert mmd_squared(kernel, measure, xi, cache=cache) >= 0.0

    def test_energy_diameter_bounded(self, rng):
        """K(x,x) + K(y,y) - 2 K(x,y) <= 2 for the unit-diagonal kernels."""
        for kernel in (Gaussian(), Matern32()):
            for _ in range(100):
                x = rng.uniform(-1, 1, size=2)
                y = rng.uniform(-1, 1, size=2)
                e = 2.0 - 2.0 * kernel.eval(x, y)
                assert -1e-12 <= e <= 2.0


class TestHerdingLMO:
    def test_no_worse_than_start_point(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        xi = dirac([0.25])
        point = herding_lmo(kernel, measure, xi, cache=cache, pool=pool)
        def g(x):
            return float(
                kernel.pairwise(np.atleast_2d(x), xi.nodes) @ xi.weights
                - cache.z(np.atleast_2d(x))
            )
        assert g(point) <= g(np.array([0.25])) + 1e-12

    def test_matches_dense_grid_scan(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        xi = dirac([0.0])
        point = herding_lmo(kernel, measure, xi, cache=cache, pool=pool)
        grid = np.linspace(-1.0, 1.0, 100001)[:, None]
        g_grid = kernel.pairwise(grid, xi.nodes) @ xi.weights - cache.z(grid)
        g_at = float(
            kernel.pairwise(point[None, :], xi.nodes) @ xi.weights
            - cache.z(point[None, :])
        )
        assert g_at <= float(np.min(g_grid)) + 1e-6
        assert abs(point[0]) >= 0.5  # minimizer sits toward the boundary

    def test_symmetric_measure_gives_symmetric_scores(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        xi = DiscreteMeasure(np.array([[0.4], [-0.4]]), np.array([0.5, 0.5]))
        pts = np.linspace(-0.9, 0.9, 31)[:, None]
        g_pos = kernel.pairwise(pts, xi.nodes) @ xi.weights - cache.z(pts)
        g_neg = kernel.pairwise(-pts, xi.nodes) @ xi.weights - cache.z(-pts)
        np.testing.assert_allclose(g_pos, g_neg, atol=1e-12)

    def test_unknown_mode_rejected(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        with pytest.raises(ConfigurationError):
            herding_lmo(kernel, measure, dirac([0.0]), mode="grid", cache=cache)


class TestBpcgHerding:
    def test_mmd_monotone_and_invariants(self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        xi, trace = run_bpcg_herding(
            kernel, measure, np.array([0.3, -0.4]),
            SolverConfig(max_iterations=80, dual_gap_tolerance=0.0),
            cache=cache, pool=pool,
        )
        prev = trace.primal_start
        for rec in trace.records:
            assert rec.primal <= prev + 1e-12
            prev = rec.primal
        assert verify_trace_invariants(trace, smoothness=2.0,
                                       diameter=HERDING_D) == []
        assert trace.drop_leq_fw_at_every_prefix()

    def test_node_count_bounded_by_fw_steps(self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        xi, trace = run_bpcg_herding(
            kernel, measure, np.array([0.1, 0.2]),
            SolverConfig(max_iterations=60, dual_gap_tolerance=0.0),
            cache=cache, pool=pool,
        )
        assert len(xi) <= trace.t_fw + 1

    def test_incremental_mmd_reanchoring_drift(self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        xi, trace = run_bpcg_herding(
            kernel, measure, np.array([-0.2, 0.6]),
            SolverConfig(max_iterations=120, dual_gap_tolerance=0.0),
            cache=cache, pool=pool,
        )
        assert trace.max_incremental_drift <= 1e-9
        # final incremental value agrees with a from-scratch assembly
        assert trace.records[-1].primal == pytest.approx(
            mmd_squared(kernel, measure, xi, cache=cache), abs=1e-9
        )

    def test_rate_bound(self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        _, trace = run_bpcg_herding(
            kernel, measure, np.array([0.5, 0.5]),
            SolverConfig(max_iterations=100, dual_gap_tolerance=0.0),
            cache=cache, pool=pool,
        )
        for t, rec in enumerate(trace.records, start=1):
            assert rec.primal <= 8.0 / t


class TestLazyBpcgHerding:
    def test_fewer_lmo_calls_than_iterations(self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        _, trace = run_lazy_bpcg_herding(
            kernel, measure, np.array([0.3, -0.4]),
            SolverConfig(max_iterations=120, dual_gap_tolerance=0.0),
            cache=cache, pool=pool,
        )
        assert trace.t_desc + trace.t_drop >= 1
        assert trace.lmo_calls < len(trace)

    def test_final_mmd_within_factor_two_at_equal_node_counts(
            self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        x0 = np.array([0.3, -0.4])
        cfg = SolverConfig(max_iterations=200, dual_gap_tolerance=0.0)
        _, tr_b = run_bpcg_herding(kernel, measure, x0, cfg,
                                   cache=cache, pool=pool)
        _, tr_l = run_lazy_bpcg_herding(kernel, measure, x0, cfg,
                                        cache=cache, pool=pool)
        best_b = dict(mmd_by_node_count(tr_b))
        best_l = dict(mmd_by_node_count(tr_l))
        common = [n for n in best_b if n in best_l and n >= 5]
        assert common
        for n in common:
            assert best_l[n] <= 2.0 * best_b[n]

    def test_phi_trace_piecewise_constant_halving(self, matern32_uniform_2d):
        kernel, measure, cache, pool = matern32_uniform_2d
        _, trace = run_lazy_bpcg_herding(
            kernel, measure, np.array([0.0, 0.0]),
            SolverConfig(max_iterations=150, dual_gap_tolerance=0.0),
            cache=cache, pool=pool,
        )
        phi = trace.phi_start
        for rec in trace.records:
            if rec.kind.value == "gap":
                assert rec.phi == phi / 2.0
            elif rec.phi is not None:
                assert rec.phi == phi
            if rec.phi is not None:
                phi = rec.phi


class TestVanillaHerding:
    def test_equal_weights_exact(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        T = 25
        xi, trace = run_vanilla_herding(
            kernel, measure, np.array([0.3]), rule="equal_weight",
            max_iterations=T, cache=cache, pool=pool,
        )
        assert len(trace) == T
        scaled = np.asarray(xi.weights) * (T + 1)
        np.testing.assert_allclose(scaled, np.round(scaled), atol=1e-9)
        assert float(np.sum(xi.weights)) == pytest.approx(1.0, abs=1e-12)

    def test_first_step_shared_and_line_search_wins_it(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        x0 = np.array([0.3])
        _, tr_eq = run_vanilla_herding(kernel, measure, x0, rule="equal_weight",
                                       max_iterations=3, cache=cache, pool=pool)
        xi_ls, tr_ls = run_vanilla_herding(kernel, measure, x0, rule="linesearch",
                                           max_iterations=3, cache=cache, pool=pool)
        # identical first proposal, better first value under line search
        assert tr_ls.records[0].fw_gap == pytest.approx(tr_eq.records[0].fw_gap)
        assert tr_ls.records[0].primal <= tr_eq.records[0].primal + 1e-12

    def test_unknown_rule(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        with pytest.raises(ConfigurationError):
            run_vanilla_herding(kernel, measure, np.array([0.0]), rule="x",
                                cache=cache, pool=pool)


class TestSbq:
    def test_single_node_maximizes_squared_embedding(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        res = run_sbq(kernel, measure, pool.points, 1, cache=cache)
        z_pool = cache.z(pool.points)
        best = pool.points[int(np.argmax(z_pool**2))]
        np.testing.assert_allclose(res.measure.nodes[0], best)

    def test_weights_reproduce_embedding_on_nodes(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        res = run_sbq(kernel, measure, pool.points, 25, cache=cache)
        gram = kernel.gram(res.measure.nodes)
        z = cache.z(res.measure.nodes)
        resid = gram @ res.measure.weights - z
        assert float(np.max(np.abs(resid))) <= 1e-8

    def test_beats_equal_weight_herding_at_same_node_count(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        n = 20
        res = run_sbq(kernel, measure, pool.points, n, cache=cache)
        _, tr_eq = run_vanilla_herding(kernel, measure, np.array([0.3]),
                                       rule="equal_weight", max_iterations=n - 1,
                                       cache=cache, pool=pool)
        eq_at_n = tr_eq.records[-1].primal  # n nodes after n-1 steps
        assert res.mmd_squared <= eq_at_n + 1e-12

    def test_history_is_monotone(self, gauss_uniform_1d):
        kernel, measure, cache, pool = gauss_uniform_1d
        res = run_sbq(kernel, measure, pool.points, 15, cache=cache)
        vals = [v for _, v in res.history]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


class TestMonteCarlo:
    def test_uniform_weights(self):
        xi = run_monte_carlo(UniformBox(2), 64, seed=5)
        np.testing.assert_allclose(xi.weights, np.full(64, 1.0 / 64))

    def test_seed_determinism(self):
        a = run_monte_carlo(TruncatedGaussian(2), 40, seed=9)
        b = run_monte_carlo(TruncatedGaussian(2), 40, seed=9)
        np.testing.assert_array_equal(a.nodes, b.nodes)

    def test_empirical_mean_clt_bound(self):
        n = 400
        xi = run_monte_carlo(UniformBox(1), n, seed=11)
        assert abs(float(xi.nodes.mean())) <= 3.0 / math.sqrt(n)

    def test_mmd_decays_with_sample_size(self, matern32_uniform_2d):
        kernel, measure, cache, _ = matern32_uniform_2d
        def median_mmd2(n):
            vals = [
                mmd_squared(kernel, measure,
                            run_monte_carlo(measure, n, seed=100 + s),
                            cache=cache)
                for s in range(20)
            ]
            return float(np.median(vals))
        assert median_mmd2(400) < median_mmd2(100)
