import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from otgeo.debias import (AUTO, AUTO_MIN, Schedule, auto_eps0, bagged_diagonal_richardson, base_divergence,
                          combine, diagonal_richardson, divergence_terms, eps_only_richardson, estimate_w2,
                          half_subsample, make_schedule, richardson_weights)
from otgeo.measure import SeedSpec, pooled_diameter
from otgeo.synth import gaussian_translation_pair, sample_brenier_pair
from runs import abs_errors, gaussian_pair_runs

gammas = st.floats(0.05, 1.0)


def small_pair(seed=0, two_n=80, d=3):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(two_n, d)), rng.normal(size=(two_n, d)) + 0.7


class TestSchedule:
    def test_formula(self):
        assert make_schedule(6, 1.0).eps(1000) == pytest.approx(1000 ** -0.1, rel=1e-14)
        assert make_schedule(6, 1.0).eps(1000) == pytest.approx(0.50119, abs=1e-5)

    def test_large_dimension_limit(self):
        s = make_schedule(1e4, 2.0)
        assert s.a < 1e-3
        assert s.eps(10**6) == pytest.approx(2.0, rel=0.02)

    def test_gamma(self):
        assert make_schedule(4, 1.0).gamma == 0.25

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.integers(1, 10**6))
    def test_invariants(self, d, eps0, n):
        s = make_schedule(d, eps0)
        assert s.a == 1.0 / (d + 4) and s.gamma == 2.0 * s.a
        assert s.eps(n) > 0

    @pytest.mark.parametrize("d,eps0", [(0, 1.0), (-1, 1.0), (3, 0.0), (3, -2.0), (math.nan, 1.0)])
    def test_invalid(self, d, eps0):
        with pytest.raises(ValueError):
            Schedule(d, eps0)

    def test_auto_eps0(self):
        X, Y = small_pair()
        assert auto_eps0(X, Y) == pytest.approx(0.05 * pooled_diameter("p2", X, Y).value)
        assert make_schedule(5, AUTO, X, Y).eps0 == auto_eps0(X, Y)
        with pytest.raises(ValueError):
            make_schedule(5, AUTO)


class TestWeights:
    def test_reference_values(self):
        w = richardson_weights(0.2)
        # the closed form evaluates to 7.7250240; the rounded reference is good to 1e-4
        assert w.w_hi == pytest.approx(2 ** 0.2 / (2 ** 0.2 - 1), rel=1e-13)
        assert w.w_lo == pytest.approx(-1 / (2 ** 0.2 - 1), rel=1e-13)
        assert w.w_hi == pytest.approx(7.72506, abs=1e-4)
        assert w.w_lo == pytest.approx(-6.72506, abs=1e-4)

    @given(st.floats(1e-6, 50.0))
    def test_sum_is_exactly_one(self, g):
        w = richardson_weights(g)
        assert w.w_hi + w.w_lo == 1.0

    @given(gammas)
    def test_identities(self, g):
        w = richardson_weights(g)
        assert w.w_hi + w.w_lo == 1.0
        assert abs(w.w_hi * 2 ** -g + w.w_lo) <= 1e-12

    @given(gammas, st.floats(-10, 10), st.floats(-10, 10), st.integers(2, 10**5))
    def test_first_order_cancellation(self, g, V, C, n):
        w = richardson_weights(g)
        s_hi, s_lo = V + C * (2 * n) ** -g, V + C * n ** -g
        assert combine(w, s_hi, s_lo) == pytest.approx(V, abs=1e-10)

    @pytest.mark.parametrize("g", [0.0, -0.1, 60.0])
    def test_invalid_gamma(self, g):
        with pytest.raises(ValueError):
            richardson_weights(g)


class TestSubsample:
    def test_half_without_replacement(self):
        X, Y = small_pair()
        Xs, Ys = half_subsample(X, Y, SeedSpec(1))
        assert Xs.shape == (40, 3)
        assert len({tuple(r) for r in Xs}) == 40
        assert all(any(np.array_equal(r, x) for x in X) for r in Xs)

    def test_clouds_get_independent_indices(self):
        X = np.arange(100.0)[:, None]
        Xs, Ys = half_subsample(X, X + 1000, SeedSpec(2))
        assert not np.array_equal(Xs, Ys - 1000)

    def test_identical_clouds_share_indices(self):
        X = np.arange(100.0)[:, None]
        Xs, Ys = half_subsample(X, X.copy(), SeedSpec(2))
        assert np.array_equal(Xs, Ys)

    def test_bags_are_prefix_stable(self):
        X, Y = small_pair()
        s = make_schedule(3, 1.0)
        _, four = divergence_terms(X, Y, s, 4, seed=SeedSpec(5))
        _, two = divergence_terms(X, Y, s, 2, seed=SeedSpec(5))
        assert [r.value for r in four[:2]] == [r.value for r in two]

    @pytest.mark.parametrize("shape", [(81, 2), (2, 2)])
    def test_sizes(self, shape):
        X = np.zeros(shape)
        with pytest.raises(ValueError):
            diagonal_richardson(X, X, make_schedule(2, 1.0))

    def test_unequal_sizes(self):
        with pytest.raises(ValueError):
            diagonal_richardson(np.zeros((10, 2)), np.zeros((12, 2)), make_schedule(2, 1.0))


class TestEstimators:
    def test_identical_clouds_give_zero(self):
        X, _ = small_pair()
        s = make_schedule(3, 0.5)
        assert abs(diagonal_richardson(X, X, s, seed=SeedSpec(1)).value) <= 1e-8
        for K in (1, 3, 8):
            assert abs(bagged_diagonal_richardson(X, X, s, K, seed=SeedSpec(1)).value) <= 1e-8
        assert abs(eps_only_richardson(X, X, 0.3).value) <= 1e-8

    def test_K1_is_diagonal(self):
        X, Y = small_pair(1)
        s = make_schedule(3, 0.5)
        a = diagonal_richardson(X, Y, s, seed=SeedSpec(4))
        b = bagged_diagonal_richardson(X, Y, s, 1, seed=SeedSpec(4))
        assert a.value == b.value

    def test_meta(self):
        X, Y = small_pair(1)
        s = make_schedule(3, 0.5)
        r = bagged_diagonal_richardson(X, Y, s, 3, seed=SeedSpec(4))
        m = r.meta
        assert m["K"] == 3 and m["n"] == 40 and len(m["s_lo"]) == 3
        assert m["eps_hi"] == s.eps(80) and m["eps_lo"] == s.eps(40)
        assert r.value == pytest.approx(m["w_hi"] * m["s_hi"] + m["w_lo"] * np.mean(m["s_lo"]), rel=1e-13)
        assert r.half_width == 0.0 and m["converged"]

    def test_eps_one_reduces_to_base(self):
        X, Y = small_pair(2)
        with pytest.warns(UserWarning):
            r = eps_only_richardson(X, Y, 1.0)
        assert r.value == pytest.approx(base_divergence(X, Y, 1.0).value, rel=1e-12)

    def test_eps_only_combination(self):
        X, Y = small_pair(2)
        r = eps_only_richardson(X, Y, 0.25)
        assert r.value == pytest.approx(2 * r.meta["s_hi"] - r.meta["s_lo"][0], rel=1e-13)
        assert r.meta["eps_lo"] == 0.5

    @given(st.integers(0, 1000), st.lists(st.floats(-100, 100), min_size=3, max_size=3))
    def test_common_translation(self, seed, t):
        X, Y = small_pair(seed, 40)
        s = make_schedule(3, 0.5)
        a = bagged_diagonal_richardson(X, Y, s, 2, seed=SeedSpec(seed)).value
        b = bagged_diagonal_richardson(X + t, Y + t, s, 2, seed=SeedSpec(seed)).value
        assert a == pytest.approx(b, abs=1e-9)
        assert eps_only_richardson(X, Y, 0.3).value == pytest.approx(
            eps_only_richardson(X + t, Y + t, 0.3).value, abs=1e-9)

    def test_seeded_determinism_across_threads(self):
        X, Y = small_pair(3)
        s = make_schedule(3, 0.5)
        runs = [bagged_diagonal_richardson(X, Y, s, 4, seed=SeedSpec(8), threads=t).value for t in (1, 1, 3)]
        assert runs[0] == runs[1] == runs[2]

    @pytest.mark.parametrize("method", ["base", "eps-rich", "diag-rich", "bagged-diag-rich"])
    def test_dispatch(self, method):
        X, Y = small_pair(4, 200)
        r = estimate_w2(method, X, Y, d_int=3.0, eps0=0.5, K=2, seed=SeedSpec(1))
        assert r.meta["method"] == method and r.meta["d_int_used"] == 3.0
        assert math.isfinite(r.value)

    def test_dispatch_auto_dimension(self):
        X, Y = small_pair(4, 400)
        a = estimate_w2("base", X, Y, seed=SeedSpec(1))
        b = estimate_w2("base", X, Y, d_int=AUTO_MIN, seed=SeedSpec(1))
        assert 0 < b.meta["d_int_used"] <= a.meta["d_int_used"]
        with pytest.raises(ValueError):
            estimate_w2("sinkhorn", X, Y)


class TestGaussianPair:
    """Twenty seeded draws of N(0, I5) vs N(1, I5), 2n = 2000, true W2^2 = 5."""

    def test_diagonal_beats_plain_in_most_seeds(self):
        runs = gaussian_pair_runs()
        better = abs_errors(runs, "diag") < abs_errors(runs, "base")
        assert better.mean() >= 0.8, better.tolist()

    def test_eps_only_worse_than_diagonal_in_most_seeds(self):
        runs = gaussian_pair_runs()
        worse = abs_errors(runs, "eps_rich") > abs_errors(runs, "diag")
        assert worse.mean() >= 0.7, worse.tolist()

    def test_bagging_reduces_variance(self):
        runs = gaussian_pair_runs()
        diag = np.var([r.diag for r in runs], ddof=1)
        bagged = np.var([r.bagged for r in runs], ddof=1)
        assert bagged < diag
