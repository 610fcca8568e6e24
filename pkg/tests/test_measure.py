import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from otgeo.measure import (CostSpec, DiscreteMeasure, EstimateReport, PointCloud, SeedSpec, cost,
                           cost_matrix, cost_matrix_exact, diameter_estimate, empirical_measure,
                           log_terms, pairwise_sq_dists, pooled_diameter)
from otgeo.synth import sample_manifold, uniform_cube

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def clouds(max_n=12, max_d=5):
    return st.integers(1, max_d).flatmap(
        lambda d: arrays(np.float64, st.tuples(st.integers(1, max_n), st.just(d)), elements=finite))


class TestCost:
    def test_identity(self):
        assert cost("p1", (3, 4), (3, 4)) == 0.0

    def test_three_four_five(self):
        assert cost(CostSpec.P1, (0, 0), (3, 4)) == 5.0

    def test_squared(self):
        assert cost(CostSpec.P2_SQUARED, (0, 0), (3, 4)) == 25.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cost("p1", (0, 0), (1, 2, 3))

    @pytest.mark.parametrize("alias,expected", [("p1", CostSpec.P1), ("1", CostSpec.P1),
                                                ("p2", CostSpec.P2_SQUARED),
                                                ("euclidean_p2_squared", CostSpec.P2_SQUARED)])
    def test_parse_aliases(self, alias, expected):
        assert CostSpec.parse(alias) is expected

    def test_parse_unknown(self):
        with pytest.raises(ValueError):
            CostSpec.parse("manhattan")

    @given(clouds(), st.sampled_from(list(CostSpec)))
    def test_symmetric_nonnegative_zero_on_diagonal(self, X, spec):
        C = cost_matrix_exact(spec, X, X)
        assert np.array_equal(C, C.T)
        assert np.all(C >= 0)
        assert np.all(np.diag(C) == 0)
        i, j = 0, X.shape[0] - 1
        assert cost(spec, X[i], X[j]) == cost(spec, X[j], X[i])

    @given(clouds(max_n=8), st.sampled_from(list(CostSpec)))
    def test_zero_iff_equal(self, X, spec):
        C = cost_matrix_exact(spec, X, X)
        same = np.all(X[:, None, :] == X[None, :, :], axis=-1)
        if spec is CostSpec.P1:
            assert np.array_equal(C == 0, same)
        else:
            # the true squared cost underflows when a coordinate gap is below ~1e-154
            gap = np.max(np.abs(X[:, None, :] - X[None, :, :]), axis=-1)
            assert np.array_equal(C == 0, same | (gap < 1e-154))

    def test_tiny_distance_does_not_underflow(self):
        assert cost("p1", [7e-177, 0.0], [0.0, 0.0]) == 7e-177
        assert cost_matrix_exact("p1", np.array([[0.0]]), np.array([[1e-200]]))[0, 0] == 1e-200

    def test_fast_matrix_close_to_exact(self):
        rng = np.random.default_rng(0)
        X, Y = rng.normal(size=(30, 7)), rng.normal(size=(20, 7))
        for spec in CostSpec:
            np.testing.assert_allclose(cost_matrix(spec, X, Y), cost_matrix_exact(spec, X, Y),
                                       rtol=1e-10, atol=1e-12)

    def test_pairwise_sq_dists_nonnegative(self):
        X = np.full((3, 2), 1e8) + np.arange(6).reshape(3, 2) * 1e-8
        assert np.all(pairwise_sq_dists(X, X) >= 0)


class TestPointCloud:
    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            PointCloud([[0.0, np.nan]])

    def test_rejects_inf(self):
        with pytest.raises(ValueError):
            PointCloud([[np.inf]])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            PointCloud(np.empty((0, 2)))

    def test_vector_is_one_dimensional_cloud(self):
        c = PointCloud([0.0, 1.0, 2.0])
        assert (c.n, c.d) == (3, 1)

    def test_immutable(self):
        c = PointCloud([[1.0, 2.0]])
        with pytest.raises(ValueError):
            c.points[0, 0] = 5.0

    def test_copy_on_construction(self):
        a = np.zeros((2, 2))
        c = PointCloud(a)
        a[0, 0] = 1.0
        assert c.points[0, 0] == 0.0


class TestEmpiricalMeasure:
    def test_four_points(self):
        m = empirical_measure(np.zeros((4, 2)))
        assert np.array_equal(m.weights, np.full(4, 0.25))

    def test_single_point(self):
        assert empirical_measure([[1.0, 2.0]]).weights.tolist() == [1.0]

    def test_three_points_sum_to_one(self):
        w = empirical_measure(np.arange(3.0)).weights
        assert np.allclose(w, 1 / 3)
        assert abs(w.sum() - 1.0) <= 1e-12

    @given(st.integers(1, 2000))
    def test_on_simplex(self, n):
        w = empirical_measure(np.zeros((n, 1))).weights
        assert np.all(w >= 0)
        assert abs(math.fsum(w) - 1.0) <= 1e-12

    def test_weight_sum_tolerance(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(np.zeros((2, 1)), [0.5, 0.5 + 1e-9])
        DiscreteMeasure(np.zeros((2, 1)), [0.5, 0.5 + 1e-13])

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(np.zeros((2, 1)), [1.5, -0.5])

    def test_drop_zero_weights(self):
        m = DiscreteMeasure(np.arange(3.0), [0.5, 0.0, 0.5]).drop_zero_weights()
        assert m.n == 2
        assert m.points[:, 0].tolist() == [0.0, 2.0]


class TestDiameter:
    def test_single_point(self):
        assert diameter_estimate([[1.0, 1.0]]).value == 0.0

    def test_unit_segment(self):
        assert diameter_estimate([0.0, 1.0], CostSpec.P1).value == 1.0

    def test_squared_triangle(self):
        d = diameter_estimate([[0, 0], [3, 4], [1, 1]], CostSpec.P2_SQUARED)
        assert d.value == 25.0
        assert d.method == "exact"

    def test_matches_brute_force(self):
        X = np.random.default_rng(3).normal(size=(300, 4))
        brute = np.sqrt(cost_matrix_exact(CostSpec.P2_SQUARED, X, X).max())
        assert diameter_estimate(X).value == pytest.approx(brute, rel=1e-12)

    def test_large_clouds_use_a_bound(self):
        X = np.random.default_rng(1).random((5000, 2))
        d = diameter_estimate(X)
        assert d.method != "exact"
        assert d.value >= diameter_estimate(X[:4096]).value
        assert d.value <= math.sqrt(2) + 1e-12

    def test_pooled(self):
        assert pooled_diameter("p1", [[0.0]], [[2.0]]).value == 2.0


class TestEstimateReport:
    def test_band(self):
        r = EstimateReport(1.0, 0.25, 0.1)
        assert (r.lo, r.hi) == (0.75, 1.25)

    @pytest.mark.parametrize("hw,delta", [(-1.0, 0.05), (0.1, 0.0), (0.1, 1.0)])
    def test_invalid(self, hw, delta):
        with pytest.raises(ValueError):
            EstimateReport(0.0, hw, delta)

    def test_log_terms(self):
        assert log_terms(0.05) == pytest.approx(math.log(40))


class TestSeedSpec:
    def test_same_seed_same_cloud(self):
        a = sample_manifold(uniform_cube(3), 50, SeedSpec(7, 2))
        b = sample_manifold(uniform_cube(3), 50, SeedSpec(7, 2))
        assert a == b
        assert np.array_equal(a.points, b.points)

    def test_streams_differ(self):
        a = SeedSpec(7, 1).rng().random(4)
        b = SeedSpec(7, 2).rng().random(4)
        assert not np.array_equal(a, b)

    def test_children_are_distinct(self):
        s = SeedSpec(1, 0)
        assert s.child(0) != s.child(1)
        assert s.child(3) == s.child(3)
