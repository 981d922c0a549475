import math

import numpy as np
import pytest
from scipy.integrate import quad

from amplify_dp._quadrature import integrate
from amplify_dp.distributions import (
    DiscreteDist,
    GaussianDist,
    Lap2Dist,
    LaplaceDist,
    density,
    lap2_density,
    quadrature_domain,
    sample,
)


def lap2_by_convolution(x, l1, l2):
    """Independent oracle: numerically convolve the two Laplace densities."""

    def f(t):
        return (math.exp(-abs(x - t) / l1) / (2 * l1)) * (math.exp(-abs(t) / l2) / (2 * l2))

    lim = 40.0 * (l1 + l2) + abs(x)
    val, err = quad(f, -lim, lim, points=sorted({0.0, x}), limit=300,
                    epsabs=1e-10, epsrel=1e-10)
    assert err < 1e-7  # an order below the comparison tolerance
    return val


class TestDiscreteDist:
    def test_valid_construction(self):
        d = DiscreteDist(["a", "b"], [0.25, 0.75])
        assert d.prob_of("b") == 0.75
        assert not d.has_coords

    def test_probs_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum"):
            DiscreteDist(["a", "b"], [0.5, 0.4])

    def test_negative_prob_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            DiscreteDist(["a", "b"], [1.5, -0.5])

    def test_duplicate_points_rejected(self):
        with pytest.raises(ValueError, match="distinct"):
            DiscreteDist(["a", "a"], [0.5, 0.5])

    def test_coords(self):
        d = DiscreteDist([(0.0, 1.0), (2.0, 3.0)], [0.5, 0.5])
        assert d.has_coords
        np.testing.assert_array_equal(d.coords(), [[0.0, 1.0], [2.0, 3.0]])

    def test_coordinate_free_rejected_by_coords(self):
        with pytest.raises(ValueError, match="no coordinates"):
            DiscreteDist(["a", "b"], [0.5, 0.5]).coords()

    def test_json_round_trip(self):
        d = DiscreteDist([(0.0,), (1.5,)], [0.3, 0.7])
        d2 = DiscreteDist.from_json(d.to_json())
        assert d2.points == d.points
        np.testing.assert_array_equal(d2.probs, d.probs)

    def test_json_round_trip_labels(self):
        d = DiscreteDist(["a", "b"], [0.3, 0.7])
        assert DiscreteDist.from_json(d.to_json()).points == ("a", "b")


class TestLap2Density:
    def test_equal_scales_at_mode(self):
        # (1/4) * e^0 * (1 + 0) with lambda = 1
        assert lap2_density(0.0, Lap2Dist(0.0, 1.0, 1.0)) == pytest.approx(0.25, abs=1e-15)

    def test_distinct_scales_at_mode(self):
        assert lap2_density(0.0, Lap2Dist(0.0, 2.0, 1.0)) == pytest.approx(1 / 6, abs=1e-12)

    def test_tail_vanishes(self):
        assert lap2_density(1e4, Lap2Dist(0.0, 2.0, 1.0)) == 0.0
        assert lap2_density(200.0, Lap2Dist(0.0, 2.0, 1.0)) < 1e-40

    def test_symmetry_about_loc(self):
        d = Lap2Dist(3.0, 1.5, 0.5)
        for z in (0.1, 1.0, 4.0):
            assert lap2_density(3.0 + z, d) == pytest.approx(lap2_density(3.0 - z, d), abs=0)

    @pytest.mark.parametrize("l1,l2", [(1.0, 1.0), (2.0, 1.0), (0.5, 1.5)])
    def test_matches_numerical_convolution(self, l1, l2):
        d = Lap2Dist(0.0, l1, l2)
        xs = np.linspace(-20 * max(l1, l2), 20 * max(l1, l2), 101)
        for x in xs:
            assert lap2_density(x, d) == pytest.approx(
                lap2_by_convolution(x, l1, l2), abs=1e-6)

    @pytest.mark.parametrize("shift", [1 + 1e-4, 1 - 1e-4])
    def test_branches_agree_near_equal_scales(self, shift):
        # The partial-fraction branch at scales (l1, l1*shift) must agree with
        # the equal-scale branch at their mean, where the switch would land.
        l1 = 1.3
        l2 = l1 * shift
        near = Lap2Dist(0.0, l1, l2)
        equal = Lap2Dist(0.0, (l1 + l2) / 2, (l1 + l2) / 2)
        for x in np.linspace(-8.0, 8.0, 33):
            assert lap2_density(x, near) == pytest.approx(lap2_density(x, equal), abs=1e-6)

    def test_equal_branch_engages_below_threshold(self):
        l1 = 1.0
        d = Lap2Dist(0.0, l1, l1 * (1 + 1e-10))
        # The unstable branch would blow up; the equal branch stays near 0.25.
        assert lap2_density(0.0, d) == pytest.approx(0.25, rel=1e-9)

    def test_scale_order_irrelevant(self):
        a, b = Lap2Dist(0.0, 2.0, 0.7), Lap2Dist(0.0, 0.7, 2.0)
        for x in (0.0, 0.3, 2.5):
            assert lap2_density(x, a) == pytest.approx(lap2_density(x, b), abs=1e-15)


class TestDensity:
    def test_standard_normal_at_mode(self):
        assert density(GaussianDist([0.0], 1.0), [0.0]) == pytest.approx(
            1 / math.sqrt(2 * math.pi), abs=1e-12)

    def test_laplace_at_mode(self):
        assert density(LaplaceDist(0.0, 1.0), 0.0) == 0.5

    def test_gaussian_2d(self):
        assert density(GaussianDist([0.0, 0.0], 2.0), [0.0, 0.0]) == pytest.approx(
            1 / (4 * math.pi), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            density(GaussianDist([0.0, 0.0], 1.0), [0.0])

    @pytest.mark.parametrize("family", [
        GaussianDist([0.3], 1.7),
        LaplaceDist(-1.0, 0.8),
        Lap2Dist(0.5, 2.0, 1.0),
        Lap2Dist(0.0, 1.2, 1.2),
    ])
    def test_integrates_to_one(self, family):
        lo, hi = quadrature_domain(family)
        breaks = [family.loc] if not isinstance(family, GaussianDist) else []

        def f(x):
            return density(family, [x] if isinstance(family, GaussianDist) else x)

        total = integrate(f, lo, hi, tol=1e-9, breakpoints=breaks)
        assert total == pytest.approx(1.0, abs=1e-6)

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            GaussianDist([0.0], 0.0)
        with pytest.raises(ValueError):
            LaplaceDist(0.0, -1.0)
        with pytest.raises(ValueError):
            Lap2Dist(0.0, 1.0, 0.0)


class TestSampling:
    def test_same_seed_same_draws(self):
        for family in (GaussianDist([0.0], 1.0), LaplaceDist(0.0, 1.0),
                       Lap2Dist(0.0, 1.0, 2.0)):
            a = sample(family, 123, 5)
            b = sample(family, 123, 5)
            np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = sample(GaussianDist([0.0], 1.0), 1, 5)
        b = sample(GaussianDist([0.0], 1.0), 2, 5)
        assert not np.array_equal(a, b)

    def test_gaussian_mean_clt(self):
        draws = sample(GaussianDist([0.0], 1.0), 2024, 10**6)
        assert abs(draws.mean()) < 4e-3  # 4 sigma / sqrt(n)

    def test_lap2_variance(self):
        # Var = 2*l1^2 + 2*l2^2 = 4 for unit scales.
        draws = sample(Lap2Dist(0.0, 1.0, 1.0), 99, 10**6)
        assert draws.var() == pytest.approx(4.0, rel=0.02)

    def test_laplace_sample_scale(self):
        draws = sample(LaplaceDist(2.0, 0.5), 7, 10**5)
        assert draws.mean() == pytest.approx(2.0, abs=0.02)
        assert draws.var() == pytest.approx(0.5, rel=0.05)  # 2 * scale^2

    def test_gaussian_nd_shape(self):
        draws = sample(GaussianDist([0.0, 1.0, 2.0], 1.0), 5, 100)
        assert draws.shape == (100, 3)
        np.testing.assert_allclose(draws.mean(axis=0), [0.0, 1.0, 2.0], atol=0.5)

    def test_n_must_be_positive(self):
        with pytest.raises(ValueError):
            sample(GaussianDist([0.0], 1.0), 1, 0)
