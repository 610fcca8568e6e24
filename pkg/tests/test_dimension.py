import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from otgeo.dimension import (DegenerateRatio, DimensionEstimate, dimension_from_values, dimension_profile,
                             discrete_w1_dimension_baseline, estimate_dimension,
                             estimate_dimension_from_cloud, propagated_band)
from otgeo.measure import SeedSpec
from otgeo.synth import intro_mixture, uniform_cube


def seeds(s):
    return SeedSpec(s, 0), SeedSpec(s, 1)


def scaled(sampler, s):
    return lambda k, rng: s * sampler(k, rng)


class TestFromValues:
    def test_halving(self):
        assert dimension_from_values(0.2, 0.1, 2.0) == pytest.approx(1.0, rel=1e-15)

    def test_inversion(self):
        assert dimension_from_values(0.2, 0.2 * 2 ** (-1 / 5), 2.0) == pytest.approx(5.0, rel=1e-12)

    @pytest.mark.parametrize("lo", [0.2, 0.3])
    def test_degenerate(self, lo):
        with pytest.raises(DegenerateRatio):
            dimension_from_values(0.2, lo, 2.0)

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            dimension_from_values(0.0, 0.0, 2.0)

    def test_eta_must_exceed_one(self):
        with pytest.raises(ValueError):
            dimension_from_values(0.2, 0.1, 1.0)

    @given(st.floats(1e-6, 10), st.floats(0.01, 0.99), st.floats(1.01, 8))
    def test_band_contains_estimate(self, ot, ratio, eta):
        d = dimension_from_values(ot, ot * ratio, eta)
        lo, hi = propagated_band(ot, 0.01 * ot, ot * ratio, 0.01 * ot * ratio, eta)
        assert 0 <= lo <= d <= hi

    def test_band_unbounded_when_intervals_overlap(self):
        lo, hi = propagated_band(0.2, 0.05, 0.18, 0.05, 1.5)
        assert hi == math.inf and lo > 0


class TestEstimateDimension:
    def test_record(self):
        e = estimate_dimension(uniform_cube(2), 200, 1.5, 5000, seeds=seeds(0))
        assert isinstance(e, DimensionEstimate)
        assert e.eta_n == 300 and e.ot_n.n == 200 and e.ot_eta_n.n == 300
        assert e.d_hat == dimension_from_values(e.ot_n.value, e.ot_eta_n.value, 1.5)
        assert e.d_hat > 0
        lo, hi = e.propagated_band
        assert lo <= e.d_hat <= hi

    def test_low_dimension_flag(self):
        e = estimate_dimension(uniform_cube(1), 200, 2.0, 20000, seeds=seeds(0))
        assert e.d_hat <= 2 and e.low_dimension

    def test_seeds_must_differ(self):
        with pytest.raises(ValueError):
            estimate_dimension(uniform_cube(2), 100, 1.5, 1000, seeds=(SeedSpec(1), SeedSpec(1)))

    @pytest.mark.parametrize("k", [-3, 1, 5])
    def test_power_of_two_rescaling_is_bit_exact(self, k):
        base = estimate_dimension(uniform_cube(3), 300, 1.5, 5000, seeds=seeds(2))
        big = estimate_dimension(scaled(uniform_cube(3), 2.0 ** k), 300, 1.5, 5000, seeds=seeds(2))
        assert big.d_hat == base.d_hat

    @given(st.floats(1e-3, 1e3))
    def test_rescaling(self, s):
        base = estimate_dimension(uniform_cube(3), 100, 1.5, 2000, seeds=seeds(3))
        other = estimate_dimension(scaled(uniform_cube(3), s), 100, 1.5, 2000, seeds=seeds(3))
        assert other.d_hat == pytest.approx(base.d_hat, rel=1e-12)

    @given(st.integers(0, 10**6))
    def test_rotation_invariance(self, seed):
        Q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(4, 4)))
        cube = uniform_cube(4)
        base = estimate_dimension(cube, 100, 1.5, 2000, seeds=seeds(4))
        rot = estimate_dimension(lambda k, rng: cube(k, rng) @ Q.T, 100, 1.5, 2000, seeds=seeds(4))
        assert abs(rot.d_hat - base.d_hat) <= 1e-9

    def test_from_cloud(self):
        X = uniform_cube(3).draw(6000, np.random.default_rng(0))
        e = estimate_dimension_from_cloud(X, seed=SeedSpec(1))
        assert e.n == 1200 and e.N == 6000 - 1800
        assert 2.0 < e.d_hat < 4.5

    def test_from_cloud_too_small(self):
        with pytest.raises(ValueError):
            estimate_dimension_from_cloud(np.zeros((4, 2)), n=3)

    def test_doubling_N_never_increases_median_error(self):
        for d in (3, 5):
            errors = []
            for N in (5000, 10_000, 20_000, 40_000):
                err = []
                for s in range(20):
                    try:
                        e = estimate_dimension(uniform_cube(d), 2000, 1.5, N, seeds=seeds(s))
                        err.append(abs(e.d_hat - d))
                    except DegenerateRatio:
                        err.append(math.inf)
                errors.append(float(np.median(err)))
            assert all(b <= a for a, b in zip(errors, errors[1:])), (d, errors)


class TestProfile:
    def test_square(self):
        p = dimension_profile(uniform_cube(2), [100, 200, 400, 800], 50_000, seeds=seeds(0))
        assert len(p.d_hat) == 3
        assert all(1.5 <= v <= 2.6 for v in p.d_hat)

    def test_curve_non_increasing(self):
        p = dimension_profile(uniform_cube(3), [50, 100, 200, 400], 20_000, seeds=seeds(1))
        vals = p.ot_values
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_scale_dependent_dimension(self):
        grid = [25, 50, 100, 200, 400, 800, 1600, 3200, 6400]
        p = dimension_profile(intro_mixture(), grid, 50_000, seeds=seeds(0))
        small, large = np.median(p.d_hat[:3]), np.median(p.d_hat[-3:])
        assert small < large

    @pytest.mark.parametrize("grid", [[100, 100], [200, 100], [100]])
    def test_grid_must_increase(self, grid):
        with pytest.raises(ValueError):
            dimension_profile(uniform_cube(2), grid, 1000, seeds=seeds(0))

    def test_degenerate_pairs_are_missing(self):
        # a Dirac measure has zero error at every size
        p = dimension_profile(lambda k, rng: np.zeros((k, 2)), [10, 20, 40], 100, seeds=seeds(0))
        assert all(math.isnan(v) for v in p.d_hat)

    def test_csv(self):
        p = dimension_profile(uniform_cube(2), [50, 100, 200], 2000, seeds=seeds(0))
        lines = p.to_csv().strip().splitlines()
        assert len(lines) == 4


class TestBaseline:
    def test_equal_values_are_degenerate(self):
        # identical draws at both sizes make both W1 values zero
        with pytest.raises((DegenerateRatio, ValueError)):
            discrete_w1_dimension_baseline(lambda k, rng: np.zeros((k, 1)), 8, 2.0)

    def test_size_limit(self):
        with pytest.raises(ValueError):
            discrete_w1_dimension_baseline(uniform_cube(2), 400, 1.5)

    def test_unit_interval(self):
        vals = []
        for s in range(20):
            try:
                vals.append(discrete_w1_dimension_baseline(uniform_cube(1), 256, 2.0, SeedSpec(s)))
            except DegenerateRatio:
                pass
        assert 0.6 <= np.median(vals) <= 1.6

    def test_agrees_with_solver_free_estimate(self):
        vals = []
        for s in range(20):
            try:
                vals.append(discrete_w1_dimension_baseline(uniform_cube(2), 256, 2.0, SeedSpec(s)))
            except DegenerateRatio:
                pass
        e = estimate_dimension(uniform_cube(2), 256, 2.0, 20_000, seeds=(SeedSpec(0, 1), SeedSpec(0, 2)))
        lo, hi = e.propagated_band
        assert lo <= np.median(vals) <= hi

    def test_backends_agree(self):
        a = discrete_w1_dimension_baseline(uniform_cube(2), 64, 2.0, SeedSpec(3), backend="native")
        b = discrete_w1_dimension_baseline(uniform_cube(2), 64, 2.0, SeedSpec(3), backend="scipy")
        assert a == pytest.approx(b, rel=1e-12)
